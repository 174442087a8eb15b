"""Orthographic texture-imaging transforms ("warps") and their cone embedding.

A warp is a 2x2 matrix ``R(theta1) @ diag(1, r) @ R(theta2)`` with
``0 < r <= 1``. Rotations are counterclockwise::

    R(theta) = [[cos, -sin],
                [sin,  cos]]

Most functions broadcast over leading axes, so a stack of shape ``(n, 2, 2)``
can be processed in one call.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Tolerances:
    eps_warp: float = 1e-9
    eps_cone: float = 1e-9
    eps_rank: float = 1e-8

    def __post_init__(self):
        for name in ("eps_warp", "eps_cone", "eps_rank"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


DEFAULT_TOL = Tolerances()


class WarpFactors(NamedTuple):
    theta1: float
    r: float
    theta2: float


class SymMat2(NamedTuple):
    """Symmetric 2x2 matrix [[x, y], [y, z]] viewed as a point in R^3."""

    x: float
    y: float
    z: float

    @classmethod
    def from_matrix(cls, m) -> "SymMat2":
        m = np.asarray(m, dtype=float)
        return cls(m[..., 0, 0], 0.5 * (m[..., 0, 1] + m[..., 1, 0]), m[..., 1, 1])

    def matrix(self) -> np.ndarray:
        x, y, z = (np.asarray(v, dtype=float) for v in self)
        return np.stack([np.stack([x, y], -1), np.stack([y, z], -1)], -2)

    def vector(self) -> np.ndarray:
        return np.stack([np.asarray(v, dtype=float) for v in self], -1)

    def norm(self) -> float:
        return float(np.sqrt(self.x**2 + 2 * self.y**2 + self.z**2))


class WarpError(ValueError):
    pass


class NegativeDeterminant(WarpError):
    pass


class SingularValueMismatch(WarpError):
    def __init__(self, sigma_max: float):
        super().__init__(f"largest singular value is {sigma_max!r}, expected 1")
        self.sigma_max = sigma_max


class RankDeficient(WarpError):
    pass


def rotation(theta) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def compose(theta1, r, theta2) -> np.ndarray:
    """Build ``R(theta1) @ diag(1, r) @ R(theta2)``; broadcasts over arrays."""
    theta1, r, theta2 = np.broadcast_arrays(
        np.asarray(theta1, float), np.asarray(r, float), np.asarray(theta2, float)
    )
    f = np.zeros(r.shape + (2, 2))
    f[..., 0, 0] = 1.0
    f[..., 1, 1] = r
    return rotation(theta1) @ f @ rotation(theta2)


def svd2(m):
    """Closed-form SVD of 2x2 matrices with non-negative determinant.

    Returns ``(phi, s_max, s_min, theta)`` with
    ``m == R(phi) @ diag(s_max, s_min) @ R(theta)``.
    """
    m = np.asarray(m, dtype=float)
    a, b, c, d = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
    e, f = 0.5 * (a + d), 0.5 * (a - d)
    g, h = 0.5 * (c + b), 0.5 * (c - b)
    q, p = np.hypot(e, h), np.hypot(f, g)
    s_max = q + p
    det = a * d - b * c
    # det / s_max keeps precision when s_min is small
    with np.errstate(divide="ignore", invalid="ignore"):
        s_min = np.where(s_max > 0, det / np.where(s_max > 0, s_max, 1.0), 0.0)
    a1 = np.arctan2(g, f)
    a2 = np.arctan2(h, e)
    return 0.5 * (a2 + a1), s_max, s_min, 0.5 * (a2 - a1)


def singular_values(m):
    m = np.asarray(m, dtype=float)
    a, b, c, d = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
    q = np.hypot(0.5 * (a + d), 0.5 * (c - b))
    p = np.hypot(0.5 * (a - d), 0.5 * (c + b))
    return q + p, np.abs(q - p)


def decompose(w, tol: Tolerances = DEFAULT_TOL) -> WarpFactors:
    """Canonical factors of a warp (or a stack of warps).

    theta1 is reduced to [0, pi) using ``R(t + pi) = -R(t)``; frontal warps
    (r within eps_warp of 1) get theta1 = 0 and r = 1 with the whole rotation
    carried by theta2.
    """
    phi, s_max, s_min, theta = svd2(w)
    r = np.minimum(s_min / s_max, 1.0)
    half_turns = np.floor(phi / np.pi)
    t1 = phi - half_turns * np.pi
    # rounding can leave t1 on either bound of [0, pi)
    over = t1 >= np.pi
    t1, half_turns = np.where(over, t1 - np.pi, t1), np.where(over, half_turns + 1, half_turns)
    t1 = np.maximum(t1, 0.0)
    t2 = np.where(np.mod(half_turns, 2) == 1, theta + np.pi, theta)
    frontal = r >= 1.0 - tol.eps_warp
    t2 = np.where(frontal, t1 + t2, t2)
    t1 = np.where(frontal, 0.0, t1)
    r = np.where(frontal, 1.0, r)
    t2 = np.mod(t2, TWO_PI)
    t2 = np.where(t2 >= TWO_PI, 0.0, t2)
    if np.ndim(t1) == 0:
        return WarpFactors(float(t1), float(r), float(t2))
    return WarpFactors(t1, r, t2)


def validate(m, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Return ``m`` as a read-only warp array, or raise a :class:`WarpError`."""
    m = np.array(m, dtype=float)
    if m.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    s_max, s_min = singular_values(m)
    if s_min <= tol.eps_warp:
        raise RankDeficient(f"smallest singular value {float(s_min)!r} is numerically zero")
    if np.linalg.det(m) <= 0:
        raise NegativeDeterminant(f"determinant {float(np.linalg.det(m))!r} is not positive")
    if abs(s_max - 1.0) > tol.eps_warp:
        raise SingularValueMismatch(float(s_max))
    m.setflags(write=False)
    return m


def spd_sqrt(m) -> np.ndarray:
    """Principal square root of a symmetric positive definite 2x2 matrix."""
    m = np.asarray(m, dtype=float)
    s = np.sqrt(np.linalg.det(m))
    return (m + s * np.eye(2)) / np.sqrt(np.trace(m) + 2.0 * s)


def is_warp(m, tol: Tolerances = DEFAULT_TOL) -> bool:
    try:
        validate(m, tol)
    except WarpError:
        return False
    return True


def gram_deficit(w) -> SymMat2:
    """``W^T W - I`` as a point on the cone y^2 = xz."""
    w = np.asarray(w, dtype=float)
    g = np.swapaxes(w, -1, -2) @ w
    h = SymMat2.from_matrix(g - np.eye(2))
    if np.ndim(h.x) == 0:
        return SymMat2(float(h.x), float(h.y), float(h.z))
    return h


class ConeCheck(NamedTuple):
    on_cone: bool
    on_negative_semicone: bool
    residual: float


def cone_check(h: SymMat2, tol: Tolerances = DEFAULT_TOL) -> ConeCheck:
    x, y, z = (float(v) for v in h)
    residual = y * y - x * z
    scale = max(1.0, x * x + 2 * y * y + z * z)
    on_cone = abs(residual) <= tol.eps_cone * scale
    negative = on_cone and x <= tol.eps_cone and z <= tol.eps_cone
    return ConeCheck(on_cone, negative, residual)


def warp_to_normal(w, branch: int = 1, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Unit surface normal of the viewed plane, facing the viewer (n_z = r).

    The foreshortened image direction is only known up to sign; ``branch``
    picks one of the two mirror-image tilts.
    """
    if branch not in (1, -1):
        raise ValueError("branch must be +1 or -1")
    theta1, r, _ = decompose(w, tol)
    sin_slant = np.sqrt(np.maximum(0.0, 1.0 - np.square(r)))
    # R(theta1) e2 = (-sin, cos)
    dx, dy = -branch * np.sin(theta1), branch * np.cos(theta1)
    return np.stack([sin_slant * dx, sin_slant * dy, np.asarray(r, float)], -1)
