import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orthotex.cone_geometry import (ConeShift, ConicClass, ConstructionFailed, EmptyInput,
                                    NotPositiveDefinite, Plane, RankMismatch, UniqueReason,
                                    affine_rank, ambiguity_verdict, b_from_shift,
                                    conic_matrix, family_sample, fit_plane, shift_from_plane,
                                    slice_conic_class, verify_alternative)
from orthotex.synthgen import HemisphereConfig, hemisphere_alt_b, hemisphere_warp
from orthotex.warp_core import SymMat2, compose, gram_deficit, is_warp

import oracles

GENERIC = [compose(0, r, t) for r, t in [(0.3, 0.1), (0.5, 0.7), (0.7, 1.9), (0.9, 2.6)]]
ALT_HALF = np.diag([0.816497, 1.414214])


def hemisphere_set(lam=0.5, n_radii=5, n_angles=8):
    xs, ys = HemisphereConfig(lam=lam, n_radii=n_radii, n_angles=n_angles).grid()
    return hemisphere_warp(xs, ys, lam)


def hemisphere_ring(lam=0.5):
    rho2 = np.array([0.55, 0.65, 0.75, 0.85, 0.95])
    return hemisphere_warp(np.sqrt(rho2), 0.0, lam)


def test_affine_rank_examples():
    assert affine_rank([SymMat2(0, 0, 0)] * 4) == 0
    assert affine_rank([gram_deficit(w) for w in hemisphere_ring()]) == 2
    assert affine_rank([gram_deficit(w) for w in GENERIC]) == 3
    assert affine_rank([(0, 0, -0.1), (0, 0, -0.2), (0, 0, -0.3)]) == 1
    with pytest.raises(EmptyInput):
        affine_rank([])


def test_affine_rank_matches_numpy_matrix_rank():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = rng.integers(1, 7)
        pts = rng.normal(size=(n, 3))
        assert affine_rank(pts) == np.linalg.matrix_rank(pts - pts.mean(0))


def test_fit_plane_hemisphere():
    p = fit_plane([gram_deficit(w) for w in hemisphere_ring()])
    s = 1 / math.sqrt(2)
    np.testing.assert_allclose(p, (s, 0, -s, 0.5 * s), atol=1e-12)


def test_fit_plane_diagonal_deficits():
    # a left rotation leaves T^T T unchanged, so rotate on the right
    ws = [compose(0, r, t) for t in (0, math.pi / 2) for r in (0.4, 0.6)]
    np.testing.assert_allclose(fit_plane([gram_deficit(w) for w in ws]), (0, 1, 0, 0), atol=1e-12)


def test_fit_plane_rejects_collinear():
    with pytest.raises(RankMismatch):
        fit_plane([(0, 0, -0.1), (0, 0, -0.2), (0, 0, -0.3)])


@pytest.mark.parametrize("coeffs, expected", [
    ((1, 0, -1, 0.5), ConicClass.HYPERBOLA),
    ((0, 0, 1, -0.5), ConicClass.PARABOLA),
    ((1, 0, -1, 0), ConicClass.TWO_LINES),
    ((1, 0, 1, -1), ConicClass.ELLIPSE),
    ((1, 0, 1, 0), ConicClass.SINGLE_POINT),
    ((1, 0, 0, 0), ConicClass.SINGLE_LINE),
])
def test_slice_conic_class(coeffs, expected):
    assert slice_conic_class(Plane.from_coefficients(*coeffs)) is expected


@settings(max_examples=200, deadline=None)
@given(st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda n: np.linalg.norm(n) > 0.1),
       st.floats(-1, 1), st.floats(0.1, 10), st.booleans())
def test_slice_class_invariant_under_rescaling(n, delta, k, flip):
    k = -k if flip else k
    a = slice_conic_class(Plane.from_coefficients(*n, delta))
    b = slice_conic_class(Plane.from_coefficients(*(k * np.array(n)), k * delta))
    assert a is b


def test_plane_canonical_sign():
    p = Plane.from_coefficients(-2, 0, 2, -1)
    assert p.alpha > 0
    np.testing.assert_allclose(p, Plane.from_coefficients(2, 0, -2, 1))


def test_shift_from_plane_examples():
    for lam in (0.1, 0.5, 0.9):
        s = shift_from_plane(Plane.from_coefficients(1, 0, -1, lam))
        np.testing.assert_allclose(s, (-lam, 0, lam), atol=1e-15)
    assert shift_from_plane(Plane.from_coefficients(0, 0, 1, -0.5)) is None
    assert shift_from_plane(Plane.from_coefficients(1, 0, -1, 0)) is None


def _conic_points(plane, n=100):
    """Sample points of plane ∩ {y^2 = xz} by intersecting in-plane rays from a chord."""
    c = conic_matrix(plane)
    normal = plane.normal
    helper = np.eye(3)[np.argmin(np.abs(normal))]
    u = np.cross(normal, helper)
    u /= np.linalg.norm(u)
    v = np.cross(normal, u)
    pts = []
    for ang in np.linspace(0, 2 * np.pi, 4 * n, endpoint=False):
        # line (s, t) = (s0, t0) + l * (cos, sin) through the in-plane origin offset
        d = np.array([math.cos(ang), math.sin(ang), 0.0])
        o = np.array([0.0, 0.0, 1.0])
        qa, qb, qc = d @ c @ d, 2 * d @ c @ o, o @ c @ o
        disc = qb * qb - 4 * qa * qc
        if abs(qa) < 1e-12 or disc < 0:
            continue
        for l in ((-qb + math.sqrt(disc)) / (2 * qa), (-qb - math.sqrt(disc)) / (2 * qa)):
            pts.append(plane.delta * normal + l * d[0] * u + l * d[1] * v)
        if len(pts) >= n:
            break
    return np.array(pts[:n])


@settings(max_examples=60, deadline=None)
@given(st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda n: np.linalg.norm(n) > 0.2),
       st.floats(-1, 1).filter(lambda d: abs(d) > 0.05))
def test_shifted_cone_contains_whole_conic(n, delta):
    plane = Plane.from_coefficients(*n, delta)
    shift = shift_from_plane(plane)
    if shift is None:
        return
    pts = _conic_points(plane)
    if len(pts) == 0:
        return
    x, y, z = pts.T
    assert np.abs(y * y - x * z).max() <= 1e-9 * max(1, np.abs(pts).max() ** 2)
    a, b, c = shift
    assert np.abs((y + b) ** 2 - (x + a) * (z + c)).max() <= 1e-9 * max(1, np.abs(pts).max() ** 2)


@pytest.mark.parametrize("lam", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_plane_shift_reproduces_hemisphere_alternative(lam):
    b = b_from_shift(shift_from_plane(Plane.from_coefficients(1, 0, -1, lam)))
    np.testing.assert_allclose(b, np.diag([1 / math.sqrt(1 + lam), 1 / math.sqrt(1 - lam)]),
                               atol=1e-9)


def test_b_from_shift_examples():
    np.testing.assert_allclose(b_from_shift(ConeShift(0, 0, 0)), np.eye(2), atol=1e-15)
    np.testing.assert_allclose(b_from_shift(ConeShift(-0.5, 0, 0.5)), ALT_HALF, atol=1e-6)
    with pytest.raises(NotPositiveDefinite):
        b_from_shift(ConeShift(1, 0, 1))


def test_b_from_shift_inverts_definition():
    s = ConeShift(-0.3, 0.2, 0.4)
    b = b_from_shift(s)
    binv = np.linalg.inv(b)
    np.testing.assert_allclose(np.eye(2) - binv.T @ binv, s.matrix(), atol=1e-12)
    np.testing.assert_allclose(b, b.T)
    assert np.all(np.linalg.eigvalsh(b) > 0)


def test_verify_alternative_examples():
    assert not verify_alternative(GENERIC, np.eye(2))
    assert verify_alternative(hemisphere_ring(), hemisphere_alt_b(0.5))
    ellipse = oracles.warps_from_deficits(oracles.ellipse_points())
    assert not verify_alternative(ellipse, math.sqrt(2) * np.eye(2))


def test_verdict_hemisphere():
    v = ambiguity_verdict(hemisphere_ring())
    assert not v.unique and v.conic is ConicClass.HYPERBOLA
    assert len(v.alternatives) == 1
    np.testing.assert_allclose(v.alternatives[0], ALT_HALF, atol=1e-6)
    assert v.affine_rank == 2 and v.plane is not None


def test_verdict_generic():
    v = ambiguity_verdict(GENERIC)
    assert v.unique and v.reason is UniqueReason.GENERIC_RANK3 and v.affine_rank == 3


def test_verdict_identity_copies():
    v = ambiguity_verdict([np.eye(2)] * 3)
    assert not v.unique and v.conic is ConicClass.SINGLE_POINT
    assert v.alternatives
    for b in v.alternatives:
        assert verify_alternative([np.eye(2)], b)


@pytest.mark.parametrize("name", list(oracles.case_table()))
def test_case_table_verdicts_match_grid_oracle(name):
    warps, label, conic = oracles.case_table()[name]
    v = ambiguity_verdict(warps)
    assert (v.label, v.conic.value) == (label, conic)
    assert (oracles.grid_shift_oracle(warps) is not None) == (label == "ambiguous")
    for b in v.alternatives:
        assert verify_alternative(warps, b)


def test_generic_random_sets_agree_with_grid_oracle():
    rng = np.random.default_rng(11)
    for _ in range(3):
        ws = compose(rng.uniform(0, 2 * np.pi, 5), rng.uniform(0.2, 1, 5), rng.uniform(0, 2 * np.pi, 5))
        v = ambiguity_verdict(ws)
        assert v.unique
        assert oracles.grid_shift_oracle(ws) is None


def test_verdict_invariant_under_common_right_rotation():
    rot = oracles.rot(0.83)
    for warps, _, _ in oracles.case_table().values():
        a = ambiguity_verdict(warps)
        b = ambiguity_verdict(np.asarray(warps) @ rot)
        assert (a.unique, a.reason, a.conic) == (b.unique, b.reason, b.conic)


def test_family_sample_identity():
    bs = family_sample([np.eye(2)] * 3, 3, seed=0)
    assert len(bs) == 3
    for i, b in enumerate(bs):
        np.testing.assert_allclose(b, b.T, atol=1e-15)
        assert np.all(np.linalg.eigvalsh(b) > 0)
        assert np.linalg.norm(b.T @ b - np.eye(2)) > 1e-8
        assert is_warp(b)
        for other in bs[:i]:
            assert np.linalg.norm(b - other) > 1e-6


def test_family_sample_generator_line():
    ws = [compose(0, r, 0) for r in (0.3, 0.5, 0.7)]
    bs = family_sample(ws, 2, seed=5)
    assert len(bs) == 2
    assert all(verify_alternative(ws, b) for b in bs)


def test_family_sample_chord_through_two_points():
    ws = [compose(0, 0.5, 0.2), compose(1.0, 0.7, 0.0)]
    bs = family_sample(ws, 3, seed=2)
    assert len(bs) == 3 and all(verify_alternative(ws, b) for b in bs)


def test_family_sample_is_deterministic_and_bounded():
    ws = [np.diag([1, 0.6])] * 2
    assert family_sample(ws, 0) == []
    a, b = family_sample(ws, 4, seed=9), family_sample(ws, 4, seed=9)
    assert len(a) == 4
    np.testing.assert_array_equal(np.array(a), np.array(b))
    with pytest.raises(RankMismatch):
        family_sample(GENERIC, 2)


def test_construction_failure_surfaces(monkeypatch):
    import orthotex.cone_geometry as cg
    monkeypatch.setattr(cg, "verify_alternative", lambda *a, **k: False)
    with pytest.raises(ConstructionFailed):
        cg.ambiguity_verdict(hemisphere_ring())


def test_n3_never_generic():
    rng = np.random.default_rng(7)
    for _ in range(50):
        ws = compose(rng.uniform(0, 7, 3), rng.uniform(0.1, 0.95, 3), rng.uniform(0, 7, 3))
        assert affine_rank([gram_deficit(w) for w in ws]) <= 2
        v = ambiguity_verdict(ws)
        assert v.reason is not UniqueReason.GENERIC_RANK3
