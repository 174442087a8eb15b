import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orthotex.warp_core import (NegativeDeterminant, RankDeficient, SingularValueMismatch,
                                SymMat2, Tolerances, compose, cone_check, decompose,
                                gram_deficit, validate, warp_to_normal)
from orthotex.synthgen import hemisphere_warp

from oracles import lapack_factors

angles = st.floats(0, 2 * math.pi, allow_nan=False)
fores = st.floats(0.05, 1.0)


def test_compose_examples():
    np.testing.assert_allclose(compose(0, 1, 0), np.eye(2), atol=0)
    np.testing.assert_allclose(compose(0, 0.5, 0), np.diag([1, 0.5]), atol=0)
    np.testing.assert_allclose(compose(math.pi / 2, 0.5, 0), [[0, -0.5], [1, 0]], atol=1e-15)


def test_compose_broadcasts():
    w = compose(np.array([0.0, math.pi / 2]), 0.5, 0.0)
    assert w.shape == (2, 2, 2)
    np.testing.assert_allclose(w[1], [[0, -0.5], [1, 0]], atol=1e-15)


@pytest.mark.parametrize("m, expected", [
    (np.eye(2), (0.0, 1.0, 0.0)),
    (np.diag([1.0, 0.5]), (0.0, 0.5, 0.0)),
    (np.array([[0.0, -0.5], [1.0, 0.0]]), (math.pi / 2, 0.5, 0.0)),
])
def test_decompose_examples(m, expected):
    got = decompose(m)
    np.testing.assert_allclose(got, expected, atol=1e-12)
    if expected[1] < 1:
        np.testing.assert_allclose(got, lapack_factors(m), atol=1e-12)


def test_decompose_frontal_puts_rotation_in_theta2():
    t1, r, t2 = decompose(compose(2.0, 1.0, 0.5))
    assert (t1, r) == (0.0, 1.0)
    assert t2 == pytest.approx(2.5)


@settings(max_examples=300, deadline=None)
@given(angles, st.floats(0.05, 0.999), angles)
def test_decompose_matches_lapack(t1, r, t2):
    w = compose(t1, r, t2)
    got = decompose(w)
    ref = lapack_factors(w)
    assert got.r == pytest.approx(ref[1], abs=1e-12)
    np.testing.assert_allclose(compose(*got), compose(*ref), atol=1e-10)
    assert 0 <= got.theta1 < math.pi and 0 <= got.theta2 < 2 * math.pi


@settings(max_examples=300, deadline=None)
@given(angles, fores, angles)
def test_round_trip(t1, r, t2):
    w = compose(t1, r, t2)
    assert np.linalg.norm(compose(*decompose(w)) - w) <= 1e-10


@settings(max_examples=300, deadline=None)
@given(angles, fores, angles)
def test_gram_deficit_on_negative_semicone(t1, r, t2):
    w = compose(t1, r, t2)
    h = w.T @ w - np.eye(2)
    assert abs(h[0, 0] * h[1, 1] - h[0, 1] * h[1, 0]) <= 1e-9
    chk = cone_check(gram_deficit(w))
    assert chk.on_cone and chk.on_negative_semicone


def test_validate_examples():
    validate(np.eye(2))
    with pytest.raises(SingularValueMismatch) as info:
        validate(np.diag([1.0, 1.2]))
    assert info.value.sigma_max == pytest.approx(1.2)
    with pytest.raises(NegativeDeterminant):
        validate(np.diag([1.0, -0.5]))
    with pytest.raises(RankDeficient):
        validate(np.diag([1.0, 0.0]))
    with pytest.raises(ValueError):
        validate([[1.0, np.nan], [0.0, 1.0]])


def test_validated_warp_is_read_only():
    w = validate(np.eye(2))
    with pytest.raises(ValueError):
        w[0, 0] = 2.0


@settings(max_examples=200, deadline=None)
@given(angles, fores, angles, st.floats(1e-7, 0.5), st.booleans())
def test_validate_accepts_warps_and_rejects_scaled(t1, r, t2, ds, up):
    tol = Tolerances()
    w = compose(t1, r, t2)
    validate(w, tol)
    s = 1 + ds if up else 1 - ds
    assert abs(s - 1) > 10 * tol.eps_warp
    with pytest.raises(SingularValueMismatch):
        validate(s * w, tol)


def test_gram_deficit_examples():
    assert gram_deficit(np.eye(2)) == (0.0, 0.0, 0.0)
    np.testing.assert_allclose(gram_deficit(np.diag([1.0, 0.5])), (0, 0, -0.75), atol=1e-15)
    h = gram_deficit(hemisphere_warp(math.sqrt(0.75), 0.0, 0.5))
    assert h.x == pytest.approx(-0.125, abs=1e-12)
    assert h.z == pytest.approx(-0.625, abs=1e-12)
    assert h.y ** 2 == pytest.approx(0.078125, abs=1e-12)


def test_gram_deficit_eigenvalues_nonpositive():
    w = compose(np.linspace(0, 6, 50), np.linspace(0.05, 1, 50), np.linspace(6, 0, 50))
    ev = np.linalg.eigvalsh(gram_deficit(w).matrix())
    assert ev.max() <= 1e-12


def test_cone_check_examples():
    for h in [(0, 0, 0), (0, 0, -0.75)]:
        chk = cone_check(SymMat2(*h))
        assert chk.residual == 0 and chk.on_cone and chk.on_negative_semicone
    y = -0.5 * math.sqrt(0.75 ** 2 - 0.5 ** 2)
    chk = cone_check(SymMat2(-0.125, y, -0.625))
    assert abs(chk.residual) <= 1e-9 and chk.on_cone and chk.on_negative_semicone
    chk = cone_check(SymMat2(0.125, -y, 0.625))
    assert chk.on_cone and not chk.on_negative_semicone
    assert not cone_check(SymMat2(0.0, 0.3, 0.0)).on_cone


def test_warp_to_normal_examples():
    np.testing.assert_array_equal(warp_to_normal(np.eye(2)), [0, 0, 1])
    np.testing.assert_array_equal(warp_to_normal(np.eye(2), -1), [0, 0, 1])
    np.testing.assert_allclose(warp_to_normal(np.diag([1, 0.5])), [0, math.sqrt(3) / 2, 0.5],
                               atol=1e-15)
    np.testing.assert_allclose(warp_to_normal(compose(math.pi / 2, 0.5, 0)),
                               [-math.sqrt(3) / 2, 0, 0.5], atol=1e-12)
    np.testing.assert_allclose(warp_to_normal(np.diag([1, 0.5]), -1),
                               [0, -math.sqrt(3) / 2, 0.5], atol=1e-15)
    with pytest.raises(ValueError):
        warp_to_normal(np.eye(2), 0)


@settings(max_examples=200, deadline=None)
@given(angles, fores, angles, st.sampled_from([1, -1]))
def test_normal_is_unit_and_nz_equals_r(t1, r, t2, branch):
    w = compose(t1, r, t2)
    n = warp_to_normal(w, branch)
    assert n[2] == decompose(w).r
    assert np.linalg.norm(n) == pytest.approx(1.0, abs=1e-12)
    assert n[2] > 0


def test_tolerances_must_be_positive():
    with pytest.raises(ValueError):
        Tolerances(eps_warp=0.0)
    with pytest.raises(ValueError):
        Tolerances(eps_rank=-1.0)
