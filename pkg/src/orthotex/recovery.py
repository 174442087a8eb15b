"""Metric upgrade: recover M = B^T B, and the true warps, from W_i = T_i B.

Each observation gives ``det(W_i^T W_i - M) = 0``. With G = W^T W expanded::

    g22*m11 - 2*g12*m12 + g11*m22 - det(M) = det(G)

which is linear in (m11, m12, m22, d) once det(M) is replaced by an extra
unknown d and checked afterwards.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .warp_core import DEFAULT_TOL, SymMat2, Tolerances, WarpError, spd_sqrt, validate
from .cone_geometry import NotPositiveDefinite


class Inconsistent(ValueError):
    pass


class ValidationFailed(ValueError):
    pass


class DegenerateInput(ValueError):
    pass


class Singular(ValueError):
    pass


class GoodWarpSet:
    """Registration output: invertible matrices with positive determinant."""

    def __init__(self, matrices):
        m = np.array(matrices, dtype=float).reshape(-1, 2, 2)
        if len(m) == 0:
            raise ValueError("need at least one matrix")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix entries must be finite")
        if np.any(np.linalg.det(m) <= 0):
            raise ValueError("every matrix must have positive determinant")
        m.setflags(write=False)
        self.matrices = m

    def __len__(self):
        return len(self.matrices)


class TextureSpec(NamedTuple):
    tau: np.ndarray
    sigma: np.ndarray
    element: np.ndarray | None = None

    @classmethod
    def make(cls, tau, sigma, element=None) -> "TextureSpec":
        tau, sigma = np.asarray(tau, float), np.asarray(sigma, float)
        if abs(tau[0] * sigma[1] - tau[1] * sigma[0]) <= 1e-12:
            raise ValueError("period vectors must be linearly independent")
        return cls(tau, sigma, element)


class MetricCandidate(NamedTuple):
    m: SymMat2
    d: float


@dataclass
class MetricSolution:
    kind: str  # "unique" | "family" | "underdetermined"
    solutions: list[MetricCandidate] = field(default_factory=list)
    residual: float = 0.0
    rank: int = 0
    nullspace_dim: int = 0


@dataclass
class Upgrade:
    m: SymMat2
    d: float
    b: np.ndarray
    warps: np.ndarray | None
    error: str | None = None

    @property
    def valid(self) -> bool:
        return self.error is None


def _matrices(ws) -> np.ndarray:
    if isinstance(ws, GoodWarpSet):
        return ws.matrices
    return GoodWarpSet(ws).matrices


def coefficient_system(ws) -> tuple[np.ndarray, np.ndarray]:
    w = _matrices(ws)
    g = np.swapaxes(w, -1, -2) @ w
    a = np.column_stack([g[:, 1, 1], -2.0 * g[:, 0, 1], g[:, 0, 0], -np.ones(len(g))])
    rhs = g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] ** 2
    return a, rhs


def _is_pd(m11, m12, m22) -> bool:
    return m11 > 0 and m11 * m22 - m12 * m12 > 0


def recover_metric(ws, tol: Tolerances = DEFAULT_TOL) -> MetricSolution:
    a, rhs = coefficient_system(ws)
    _, s, vt = np.linalg.svd(a)
    cutoff = tol.eps_rank * max(1.0, float(s[0]))
    rank = int(np.sum(s > cutoff))
    if rank <= 2:
        return MetricSolution("underdetermined", rank=rank, nullspace_dim=4 - rank)

    if rank == 4:
        p0, *_ = np.linalg.lstsq(a, rhs, rcond=None)
        m11, m12, m22, d = p0
        residual = float(np.abs(a @ p0 - rhs).max())
        det_m = m11 * m22 - m12 * m12
        slack = max(tol.eps_rank, tol.eps_warp) * max(1.0, abs(d))
        if abs(d - det_m) > slack or not _is_pd(m11, m12, m22):
            raise Inconsistent(
                f"metric system solved to m=({m11}, {m12}, {m22}), d={d}, det(m)={det_m}")
        return MetricSolution("unique", [MetricCandidate(SymMat2(m11, m12, m22), float(d))],
                              residual, 4, 0)

    # rank 3: p(s) = p0 + s v, with d(s) = m11(s) m22(s) - m12(s)^2 imposed
    # p0 from lstsq is the minimum-norm solution, hence orthogonal to v
    v = vt[3]
    p0 = np.linalg.pinv(a, rcond=cutoff / s[0]) @ rhs
    qa = v[0] * v[2] - v[1] ** 2
    qb = p0[0] * v[2] + v[0] * p0[2] - 2 * p0[1] * v[1] - v[3]
    qc = p0[0] * p0[2] - p0[1] ** 2 - p0[3]
    roots = _quadratic_roots(qa, qb, qc)
    cands = []
    for root in roots:
        m11, m12, m22, d = p0 + root * v
        if _is_pd(m11, m12, m22):
            cands.append(MetricCandidate(SymMat2(float(m11), float(m12), float(m22)), float(d)))
    cands.sort(key=lambda c: c.d)
    residual = max((float(np.abs(a @ np.array([*c.m, c.d]) - rhs).max()) for c in cands),
                   default=float(np.abs(a @ p0 - rhs).max()))
    return MetricSolution("family", cands, residual, 3, 1)


def _quadratic_roots(qa, qb, qc, rel=1e-10) -> list[float]:
    scale = max(abs(qa), abs(qb), abs(qc), 1e-300)
    if abs(qa) <= 1e-12 * scale:
        return [] if abs(qb) <= 1e-12 * scale else [-qc / qb]
    disc = qb * qb - 4 * qa * qc
    # tangent slices (line pairs) give a double root that rounding splits apart
    if abs(disc) <= rel * max(qb * qb, abs(4 * qa * qc)):
        return [-qb / (2 * qa)]
    if disc < 0:
        return []
    q = -0.5 * (qb + math.copysign(math.sqrt(disc), qb))
    return sorted([q / qa, qc / q])


def metric_to_b(m) -> np.ndarray:
    """Symmetric positive definite B with B^T B = M."""
    mat = m.matrix() if isinstance(m, SymMat2) else np.asarray(m, dtype=float)
    if not _is_pd(mat[0, 0], 0.5 * (mat[0, 1] + mat[1, 0]), mat[1, 1]):
        raise NotPositiveDefinite("metric must be symmetric positive definite")
    return spd_sqrt(mat)


def upgrade(ws, tol: Tolerances = DEFAULT_TOL) -> list[Upgrade]:
    """Undo B for every admissible metric.

    A unique metric whose upgraded matrices are not warps raises
    ``ValidationFailed``; in a family such candidates are kept with ``error``
    set so that callers can see both roots. A family with no valid member
    raises.
    """
    w = _matrices(ws)
    sol = recover_metric(w, tol)
    if sol.kind == "underdetermined":
        raise DegenerateInput(f"metric system has rank {sol.rank}; no upgrade possible")
    results = []
    for cand in sol.solutions:
        b = metric_to_b(cand.m)
        t = w @ np.linalg.inv(b)
        error = None
        for i, ti in enumerate(t):
            try:
                validate(ti, tol)
            except WarpError as exc:
                error = f"matrix {i}: {type(exc).__name__}: {exc}"
                break
        results.append(Upgrade(cand.m, cand.d, b, t if error is None else None, error))
    if sol.kind == "unique" and not results[0].valid:
        raise ValidationFailed(results[0].error)
    if not any(r.valid for r in results):
        raise ValidationFailed("no metric candidate yields a set of warps")
    return results


def align_rotation(a, c) -> np.ndarray:
    """Rotation O minimising sum ||A_i O - C_i||_F^2 (planar Procrustes)."""
    a = np.asarray(a, float).reshape(-1, 2, 2)
    c = np.asarray(c, float).reshape(-1, 2, 2)
    if len(a) == 0 or a.shape != c.shape:
        raise ValueError("need two nonempty lists of equal length")
    k = np.einsum("nji,njk->ik", a, c)
    sin_part, cos_part = k[1, 0] - k[0, 1], k[0, 0] + k[1, 1]
    if np.hypot(sin_part, cos_part) <= 1e-14 * max(1.0, np.abs(k).max()):
        raise DegenerateInput("alignment objective is constant in the rotation angle")
    theta = np.arctan2(sin_part, cos_part)
    ct, st = np.cos(theta), np.sin(theta)
    return np.array([[ct, -st], [st, ct]])


def transported_periods(b, t: TextureSpec) -> tuple[np.ndarray, np.ndarray]:
    b = np.asarray(b, float)
    if abs(np.linalg.det(b)) <= 1e-12:
        raise Singular("B is not invertible")
    binv = np.linalg.inv(b)
    return binv @ np.asarray(t.tau, float), binv @ np.asarray(t.sigma, float)
