"""Gram deficits as points on the cone y^2 = xz, and what their layout implies.

If the deficits of a warp set span three dimensions the only matrices B that
keep every ``T_i @ B`` a warp are rotations. When they are coplanar the type
of the planar conic slice decides: hyperbolas (and the degenerate point/line
slices) admit non-rotational B, ellipses, parabolas and line pairs do not.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .synthgen import Rng, rng_next
from .warp_core import (DEFAULT_TOL, SymMat2, Tolerances, gram_deficit, singular_values,
                        spd_sqrt)

# quadratic form of y^2 - xz on (x, y, z)
CONE_FORM = np.array([[0.0, 0.0, -0.5], [0.0, 1.0, 0.0], [-0.5, 0.0, 0.0]])


class EmptyInput(ValueError):
    pass


class RankMismatch(ValueError):
    pass


class NotPositiveDefinite(ValueError):
    pass


class ConstructionFailed(RuntimeError):
    pass


class ConicClass(enum.Enum):
    ELLIPSE = "ellipse"
    PARABOLA = "parabola"
    HYPERBOLA = "hyperbola"
    SINGLE_POINT = "single_point"
    SINGLE_LINE = "single_line"
    TWO_LINES = "two_lines"


class UniqueReason(enum.Enum):
    GENERIC_RANK3 = "generic_rank3"
    ELLIPSE_SLICE = "ellipse_slice"
    PARABOLA_SLICE = "parabola_slice"
    TWO_LINES_SLICE = "two_lines_slice"


_UNIQUE_SLICES = {
    ConicClass.ELLIPSE: UniqueReason.ELLIPSE_SLICE,
    ConicClass.PARABOLA: UniqueReason.PARABOLA_SLICE,
    ConicClass.TWO_LINES: UniqueReason.TWO_LINES_SLICE,
}


class Plane(NamedTuple):
    """alpha*x + beta*y + gamma*z = delta with a canonical unit normal."""

    alpha: float
    beta: float
    gamma: float
    delta: float

    @classmethod
    def from_coefficients(cls, alpha, beta, gamma, delta) -> "Plane":
        n = np.array([alpha, beta, gamma], dtype=float)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise ValueError("plane normal must be nonzero")
        n, delta = n / norm, float(delta) / float(norm)
        big = np.flatnonzero(np.abs(n) > 1e-12)
        if n[big[0]] < 0:
            n, delta = -n, -delta
        return cls(float(n[0]), float(n[1]), float(n[2]), delta)

    @property
    def normal(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.gamma])

    def distance(self, p) -> np.ndarray:
        return np.asarray(p, float) @ self.normal - self.delta


class ConeShift(NamedTuple):
    """Entries of ``I - B^-T B^-1``; the shifted cone is (y+b)^2 = (x+a)(z+c)."""

    a: float
    b: float
    c: float

    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.b, self.c]])


@dataclass
class Verdict:
    unique: bool
    reason: UniqueReason | None = None
    conic: ConicClass | None = None
    alternatives: list[np.ndarray] = field(default_factory=list)
    affine_rank: int = 0
    plane: Plane | None = None
    margins: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        return "unique" if self.unique else "ambiguous"


def _points(points) -> np.ndarray:
    if isinstance(points, SymMat2):
        return np.atleast_2d(points.vector())
    return np.atleast_2d(np.array([tuple(p) for p in points], dtype=float))


def _centered_svd(points):
    pts = _points(points)
    if pts.size == 0:
        raise EmptyInput("need at least one point")
    centroid = pts.mean(axis=0)
    _, s, vt = np.linalg.svd(pts - centroid)
    s = np.concatenate([s, np.zeros(3 - len(s))])
    return pts, centroid, s, vt


def _rank_cutoff(s, tol: Tolerances) -> float:
    # deficit coordinates are bounded by 1, so never let the cutoff collapse below eps_rank
    return tol.eps_rank * max(1.0, float(s[0]))


def affine_rank(points, tol: Tolerances = DEFAULT_TOL) -> int:
    _, _, s, _ = _centered_svd(points)
    return int(np.sum(s > _rank_cutoff(s, tol)))


def fit_plane(points, tol: Tolerances = DEFAULT_TOL) -> Plane:
    pts, centroid, s, vt = _centered_svd(points)
    rank = int(np.sum(s > _rank_cutoff(s, tol)))
    if rank != 2 or len(pts) < 3:
        raise RankMismatch(f"plane fit needs affine rank 2, got {rank}")
    n = vt[2]
    return Plane.from_coefficients(*n, n @ centroid)


def _in_plane_basis(n):
    n = np.asarray(n, float)
    helper = np.eye(3)[np.argmin(np.abs(n))]
    u = np.cross(n, helper)
    u /= np.linalg.norm(u)
    return u, np.cross(n, u)


def conic_matrix(p: Plane) -> np.ndarray:
    """3x3 matrix of y^2 - xz restricted to the plane, in homogeneous (s, t, 1)."""
    n = p.normal
    u, v = _in_plane_basis(n)
    frame = np.column_stack([u, v, p.delta * n])
    return frame.T @ CONE_FORM @ frame


def slice_conic_class(p: Plane, tol: Tolerances = DEFAULT_TOL) -> ConicClass:
    c = conic_matrix(p)
    quad = c[:2, :2]
    disc = float(np.linalg.det(quad))
    flat = abs(disc) <= tol.eps_rank * max(1e-300, float(np.abs(quad).max())) ** 2
    scale = max(1.0, float(np.abs(c).max()))
    degenerate = abs(float(np.linalg.det(c))) <= tol.eps_rank * scale**3
    if flat:
        return ConicClass.SINGLE_LINE if degenerate else ConicClass.PARABOLA
    if disc > 0:
        return ConicClass.SINGLE_POINT if degenerate else ConicClass.ELLIPSE
    return ConicClass.TWO_LINES if degenerate else ConicClass.HYPERBOLA


def _shift_denominator(p: Plane) -> float:
    return p.beta**2 / 4.0 - p.alpha * p.gamma


def shift_from_plane(p: Plane, tol: Tolerances = DEFAULT_TOL) -> ConeShift | None:
    """The cone translation whose intersection with y^2 = xz lies in ``p``.

    Matches ``c x - 2b y + a z = b^2 - ac`` against the plane equation.
    """
    den = _shift_denominator(p)
    if abs(den) <= tol.eps_cone or p.delta == 0.0:
        return None
    t = p.delta / den
    return ConeShift(float(t * p.gamma), float(-t * p.beta / 2.0), float(t * p.alpha))


def _is_spd(m, eps=0.0) -> bool:
    return bool(m[0, 0] > eps and np.linalg.det(m) > eps * max(1.0, abs(m[1, 1])))


def b_from_shift(s: ConeShift, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    m = np.eye(2) - s.matrix()
    if not np.all(np.isfinite(m)) or not _is_spd(m, tol.eps_cone):
        raise NotPositiveDefinite(f"I - shift is not positive definite: {m.tolist()}")
    return np.linalg.inv(spd_sqrt(m))


def verify_alternative(warps, b, tol: Tolerances = DEFAULT_TOL) -> bool:
    b = np.asarray(b, dtype=float)
    if np.linalg.norm(b.T @ b - np.eye(2)) <= 10 * tol.eps_warp:
        return False
    wb = np.asarray(warps, dtype=float).reshape(-1, 2, 2) @ b
    s_max, s_min = singular_values(wb)
    det = np.linalg.det(wb)
    return bool(np.all(np.abs(s_max - 1.0) <= tol.eps_warp)
                and np.all(s_min > tol.eps_warp) and np.all(det > 0))


def _deficit_points(warps) -> np.ndarray:
    w = np.asarray(warps, dtype=float).reshape(-1, 2, 2)
    if len(w) == 0:
        raise EmptyInput("need at least one warp")
    return gram_deficit(w).vector().reshape(-1, 3)


def _shift_along(normal, t) -> ConeShift:
    al, be, ga = normal
    return ConeShift(t * ga, -t * be / 2.0, t * al)


def family_sample(warps, k: int, seed: int = 0, tol: Tolerances = DEFAULT_TOL,
                  max_tries: int | None = None) -> list[np.ndarray]:
    """Sample up to ``k`` verified non-rotational B for degenerate deficit sets.

    Planes are drawn from the pencil through the (point or line) deficit set.
    When that set contains the apex every such plane passes through the origin
    and only planes tangent to the cone admit shifts; those carry a free scale,
    which is sampled as well.
    """
    if k <= 0:
        return []
    pts = _deficit_points(warps)
    _, centroid, s, vt = _centered_svd(pts)
    rank = int(np.sum(s > _rank_cutoff(s, tol)))
    if rank > 1:
        raise RankMismatch(f"family sampling needs affine rank <= 1, got {rank}")
    direction = vt[0] if rank == 1 else None
    # the apex lies in the affine hull: line through it or point at it
    if direction is None:
        through_apex = np.linalg.norm(centroid) <= tol.eps_cone
    else:
        off = centroid - (centroid @ direction) * direction
        through_apex = np.linalg.norm(off) <= tol.eps_cone

    rng = Rng(seed)
    out: list[np.ndarray] = []
    tries = max_tries if max_tries is not None else 200 * k
    for _ in range(tries):
        if len(out) >= k:
            break
        if through_apex:
            if direction is not None:
                g = direction
            else:
                rng, u = rng_next(rng)
                psi = math.pi * u
                g = np.array([math.sin(psi) ** 2, math.sin(psi) * math.cos(psi), math.cos(psi) ** 2])
            # gradient of y^2 - xz along the generator g
            normal = np.array([-g[2], 2 * g[1], -g[0]])
            normal /= np.linalg.norm(normal)
            rng, u = rng_next(rng)
            shift = _shift_along(normal, 2.0 * u - 1.0)
        else:
            rng, u1 = rng_next(rng)
            rng, u2 = rng_next(rng)
            if direction is None:
                zc = 2.0 * u1 - 1.0
                ang = 2.0 * math.pi * u2
                rad = math.sqrt(max(0.0, 1.0 - zc * zc))
                normal = np.array([rad * math.cos(ang), rad * math.sin(ang), zc])
            else:
                e1, e2 = vt[1], vt[2]
                ang = 2.0 * math.pi * u1
                normal = math.cos(ang) * e1 + math.sin(ang) * e2
            plane = Plane.from_coefficients(*normal, normal @ centroid)
            shift = shift_from_plane(plane, tol)
            if shift is None:
                continue
        try:
            b = b_from_shift(shift, tol)
        except NotPositiveDefinite:
            continue
        if not verify_alternative(warps, b, tol):
            continue
        if any(np.linalg.norm(b - prev) <= 1e-6 for prev in out):
            continue
        out.append(b)
    return out


def ambiguity_verdict(warps, tol: Tolerances = DEFAULT_TOL, seed: int = 0,
                      n_alternatives: int = 3) -> Verdict:
    pts = _deficit_points(warps)
    _, centroid, s, _ = _centered_svd(pts)
    cutoff = _rank_cutoff(s, tol)
    rank = int(np.sum(s > cutoff))
    margins = {"singular_values": [float(v) for v in s], "rank_cutoff": cutoff}
    if rank == 3:
        return Verdict(True, UniqueReason.GENERIC_RANK3, affine_rank=3, margins=margins)

    if rank == 2:
        plane = fit_plane(pts, tol)
        conic = slice_conic_class(plane, tol)
        quad = conic_matrix(plane)
        margins["conic_discriminant"] = float(np.linalg.det(quad[:2, :2]))
        margins["conic_determinant"] = float(np.linalg.det(quad))
        margins["plane_residual"] = float(np.abs(plane.distance(pts)).max())
        if conic in _UNIQUE_SLICES:
            return Verdict(True, _UNIQUE_SLICES[conic], conic, affine_rank=2,
                           plane=plane, margins=margins)
        if conic is ConicClass.HYPERBOLA:
            shift = shift_from_plane(plane, tol)
            alternatives = []
            if shift is not None:
                try:
                    b = b_from_shift(shift, tol)
                except NotPositiveDefinite:
                    b = None
                if b is not None and verify_alternative(warps, b, tol):
                    alternatives.append(b)
            if not alternatives:
                raise ConstructionFailed(
                    f"hyperbola slice {tuple(plane)} but the plane-derived B does not verify")
            margins["shift"] = list(shift)
            return Verdict(False, None, conic, alternatives, 2, plane, margins)
        # numerically degenerate slice: handled like the point/line cases below
    else:
        plane = None
        conic = ConicClass.SINGLE_POINT if rank == 0 else ConicClass.SINGLE_LINE

    alternatives = family_sample(warps, n_alternatives, seed, tol) if rank <= 1 else []
    if not alternatives:
        raise ConstructionFailed(f"{conic.value} deficit set but no alternative B verified")
    return Verdict(False, None, conic, alternatives, rank, plane, margins)
