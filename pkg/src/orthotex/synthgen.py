"""Synthetic data: the ambiguous hemisphere, random warp sets, and rendering."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .warp_core import compose, rotation, warp_to_normal

MASK64 = (1 << 64) - 1


class DomainError(ValueError):
    pass


class SingularWarp(ValueError):
    pass


# -- splitmix64 ---------------------------------------------------------------

@dataclass(frozen=True)
class Rng:
    state: int = 0

    def __post_init__(self):
        object.__setattr__(self, "state", self.state & MASK64)


def rng_next(r: Rng) -> tuple[Rng, float]:
    """One splitmix64 step; returns the advanced generator and a double in [0, 1)."""
    state = (r.state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    z ^= z >> 31
    return Rng(state), (z >> 11) / 9007199254740992.0


def random_warp(r: Rng, r_min: float) -> tuple[Rng, np.ndarray]:
    if not 0.0 < r_min <= 1.0:
        raise ValueError("r_min must lie in (0, 1]")
    r, u1 = rng_next(r)
    r, u2 = rng_next(r)
    r, u3 = rng_next(r)
    fore = r_min + (1.0 - r_min) * u2
    return r, compose(2.0 * math.pi * u1, fore, 2.0 * math.pi * u3)


def random_good_set(r: Rng, n: int, b, r_min: float) -> tuple[Rng, np.ndarray, np.ndarray]:
    """Draw ``n`` true warps T_i and return ``(rng, observed T_i @ B, truth T_i)``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    b = np.asarray(b, dtype=float)
    if b.shape != (2, 2) or not np.linalg.det(b) > 0:
        raise ValueError("B must be a 2x2 matrix with positive determinant")
    truth = np.empty((n, 2, 2))
    for i in range(n):
        r, truth[i] = random_warp(r, r_min)
    return r, truth @ b, truth


# -- hemisphere example -------------------------------------------------------

def _check_lambda(lam):
    if not 0.0 < lam < 1.0:
        raise DomainError(f"lambda must lie in (0, 1), got {lam!r}")


def phi(x, y, lam: float):
    """Tangent-plane rotation of the hemisphere warp at (x, y): half the arccos of lambda / rho^2."""
    rho2 = np.square(x) + np.square(y)
    if np.any(rho2 < lam * (1 - 1e-12)) or np.any(rho2 > 1.0 + 1e-12):
        raise DomainError(f"rho^2 must lie in [{lam}, 1]")
    # tan(phi) = sqrt((1 - c) / (1 + c)) with c = lam / rho^2; better conditioned than arccos near c = 1
    return np.arctan(np.sqrt(np.maximum(rho2 - lam, 0.0) / (rho2 + lam)))


def hemisphere_warp(x, y, lam: float) -> np.ndarray:
    """True warp of the hemisphere z = sqrt(1 - x^2 - y^2) at (x, y); broadcasts."""
    _check_lambda(lam)
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    rho2 = x * x + y * y
    if np.any(rho2 >= 1.0):
        raise DomainError("rho^2 must be < 1 (the rim is not a warp)")
    angle = phi(x, y, lam)
    rho = np.sqrt(rho2)
    left = np.stack([np.stack([x, y], -1), np.stack([-y, x], -1)], -2) / rho[..., None, None]
    fore = np.zeros(x.shape + (2, 2))
    fore[..., 0, 0] = 1.0
    fore[..., 1, 1] = np.sqrt(1.0 - rho2)
    return left @ fore @ rotation(angle)


def hemisphere_alt_b(lam: float) -> np.ndarray:
    _check_lambda(lam)
    return np.diag([1.0 / math.sqrt(1.0 + lam), 1.0 / math.sqrt(1.0 - lam)])


@dataclass(frozen=True)
class HemisphereConfig:
    lam: float = 0.5
    n_radii: int = 5
    n_angles: int = 8
    rho2_min: float | None = None
    rho2_max: float = 0.95
    canvas: int = 400
    element_frac: float = 0.16

    def __post_init__(self):
        _check_lambda(self.lam)
        if self.rho2_min is None:
            # lam + 0.05 would collide with rho2_max for lam >= 0.9
            object.__setattr__(self, "rho2_min", min(self.lam + 0.05, 0.5 * (self.lam + self.rho2_max)))
        if self.n_radii < 1 or self.n_angles < 1:
            raise DomainError("n_radii and n_angles must be positive")
        if not (self.lam <= self.rho2_min < self.rho2_max < 1.0) and not (
                self.n_radii == 1 and self.lam <= self.rho2_min < 1.0):
            raise DomainError("need lambda <= rho2_min < rho2_max < 1")

    def grid(self) -> tuple[np.ndarray, np.ndarray]:
        rho2 = np.linspace(self.rho2_min, self.rho2_max, self.n_radii)
        ang = 2.0 * np.pi * np.arange(self.n_angles) / self.n_angles
        rr, aa = np.meshgrid(np.sqrt(rho2), ang, indexing="ij")
        return (rr * np.cos(aa)).ravel(), (rr * np.sin(aa)).ravel()


class SurfaceSample(NamedTuple):
    x: float
    y: float
    z: float
    warp: np.ndarray
    normal_plus: np.ndarray
    normal_minus: np.ndarray


def hemisphere_samples(cfg: HemisphereConfig) -> list[SurfaceSample]:
    xs, ys = cfg.grid()
    warps = hemisphere_warp(xs, ys, cfg.lam)
    out = []
    for x, y, w in zip(xs, ys, warps):
        out.append(SurfaceSample(float(x), float(y), math.sqrt(1.0 - x * x - y * y), w,
                                 warp_to_normal(w, 1), warp_to_normal(w, -1)))
    return out


# -- rendering ----------------------------------------------------------------

def square_outline(size: int = 32, thickness: int = 3, channels: int = 3) -> np.ndarray:
    img = np.full((size, size, channels), 255, np.uint8)
    img[:thickness] = img[-thickness:] = 0
    img[:, :thickness] = img[:, -thickness:] = 0
    return img


def _as_image(img) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3) or img.shape[0] == 0 or img.shape[1] == 0:
        raise ValueError("element must be a nonempty HxW, HxWx1 or HxWx3 array")
    return img.astype(np.uint8, copy=False)


def _out_shape(out_size) -> tuple[int, int]:
    if np.isscalar(out_size):
        return int(out_size), int(out_size)
    w, h = out_size
    return int(h), int(w)


def _resample(element, w, out_size, scale):
    """Bilinear inverse mapping; returns (float samples, coverage in [0, 1])."""
    img = _as_image(element)
    w = np.asarray(w, dtype=float)
    det = np.linalg.det(w)
    if not np.isfinite(det) or abs(det) <= 1e-12:
        raise SingularWarp("warp is not invertible")
    winv = np.linalg.inv(w)
    oh, ow = _out_shape(out_size)
    eh, ew, ch = img.shape
    # pixel centres, origin at the patch centre, y up
    px = (np.arange(ow) + 0.5 - ow / 2.0) / scale
    py = -(np.arange(oh) + 0.5 - oh / 2.0) / scale
    gx, gy = np.meshgrid(px, py)
    qx = winv[0, 0] * gx + winv[0, 1] * gy
    qy = winv[1, 0] * gx + winv[1, 1] * gy
    # element pixel coordinates in a 1-pixel white-padded copy
    col = qx + ew / 2.0 - 0.5 + 1.0
    row = eh / 2.0 - qy - 0.5 + 1.0
    padded = np.full((eh + 2, ew + 2, ch), 255.0)
    padded[1:-1, 1:-1] = img
    alpha = np.zeros((eh + 2, ew + 2))
    alpha[1:-1, 1:-1] = 1.0
    c0, r0 = np.floor(col), np.floor(row)
    inside = (c0 >= 0) & (r0 >= 0) & (c0 <= ew) & (r0 <= eh)
    c0 = np.where(inside, c0, 0).astype(int)
    r0 = np.where(inside, r0, 0).astype(int)
    fc = np.where(inside, col - c0, 0.0)[..., None]
    fr = np.where(inside, row - r0, 0.0)[..., None]

    def lerp(a):
        top = a[r0, c0] * (1 - fc) + a[r0, c0 + 1] * fc
        bot = a[r0 + 1, c0] * (1 - fc) + a[r0 + 1, c0 + 1] * fc
        return top * (1 - fr) + bot * fr

    values = np.where(inside[..., None], lerp(padded), 255.0)
    cover = np.where(inside, lerp(alpha[..., None])[..., 0], 0.0)
    return values, cover


def _to_u8(values) -> np.ndarray:
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def render_warped_element(element, w, out_size, scale: float = 1.0) -> np.ndarray:
    values, _ = _resample(element, w, out_size, scale)
    return _to_u8(values)


def encode_normals(n) -> np.ndarray:
    """Map unit normals to 8-bit RGB with round(255 * (n + 1) / 2), halves away from zero."""
    v = 255.0 * (np.asarray(n, float) + 1.0) / 2.0
    return _to_u8(v)


def decode_normals(rgb) -> np.ndarray:
    return 2.0 * np.asarray(rgb, float) / 255.0 - 1.0


def _normal_map(cfg: HemisphereConfig, b=None) -> np.ndarray:
    size = cfg.canvas
    radius = 0.45 * size
    centre = size / 2.0
    coords = (np.arange(size) + 0.5 - centre) / radius
    gx, gy = np.meshgrid(coords, -coords)
    rho2 = gx * gx + gy * gy
    mask = (rho2 >= cfg.lam) & (rho2 < 1.0)
    out = np.full((size, size, 3), 255, np.uint8)
    warps = hemisphere_warp(gx[mask], gy[mask], cfg.lam)
    if b is not None:
        warps = warps @ b
    out[mask] = encode_normals(warp_to_normal(warps, 1))
    return out


def paint_hemisphere(cfg: HemisphereConfig, element) -> dict[str, np.ndarray]:
    """Composite image, both normal maps and the alternative frontal element."""
    element = _as_image(element)
    size = cfg.canvas
    radius = 0.45 * size
    centre = size / 2.0
    scale = cfg.element_frac * radius / max(element.shape[:2])
    patch = int(math.ceil(math.hypot(*element.shape[:2]) * scale)) + 2
    composite = np.full((size, size, element.shape[2]), 255.0)

    xs, ys = cfg.grid()
    warps = hemisphere_warp(xs, ys, cfg.lam)
    # back to front: the rim is farthest from the viewer
    order = np.argsort(-(xs * xs + ys * ys), kind="stable")
    for k in order:
        values, cover = _resample(element, warps[k], patch, scale)
        top = int(round(centre - ys[k] * radius - patch / 2.0))
        left = int(round(centre + xs[k] * radius - patch / 2.0))
        r0, c0 = max(top, 0), max(left, 0)
        r1, c1 = min(top + patch, size), min(left + patch, size)
        if r0 >= r1 or c0 >= c1:
            continue
        sub_v = values[r0 - top:r1 - top, c0 - left:c1 - left]
        sub_c = cover[r0 - top:r1 - top, c0 - left:c1 - left] > 0.5
        region = composite[r0:r1, c0:c1]
        region[sub_c] = sub_v[sub_c]

    b = hemisphere_alt_b(cfg.lam)
    binv = np.linalg.inv(b)
    el_scale = 2.0
    el_size = int(math.ceil(max(element.shape[:2]) * el_scale * max(1.0, np.abs(binv).sum(1).max()))) + 2
    return {
        "composite": _to_u8(composite),
        "normal_map_true": _normal_map(cfg),
        "normal_map_alt": _normal_map(cfg, b),
        "element_true": render_warped_element(element, np.eye(2), el_size, el_scale),
        "element_alt": render_warped_element(element, binv, el_size, el_scale),
    }
