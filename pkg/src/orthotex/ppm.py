"""Binary PPM (P6) / PGM (P5) reading and writing, 8-bit only."""
from __future__ import annotations

import numpy as np


def encode(img) -> bytes:
    img = np.asarray(img, dtype=np.uint8)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"unsupported image shape {img.shape}")
    h, w = img.shape[:2]
    return magic + b"\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(img).tobytes()


def write(path, img) -> None:
    with open(path, "wb") as f:
        f.write(encode(img))


def _tokens(data: bytes, count: int, pos: int):
    out = []
    while len(out) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PNM header")
        out.append(data[start:pos])
    return out, pos


def decode(data: bytes) -> np.ndarray:
    """Parse P5/P6 bytes into an HxWxC uint8 array (C = 1 or 3)."""
    (magic, w, h, maxval), pos = _tokens(data, 4, 0)
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"not a binary PGM/PPM file (magic {magic!r})")
    w, h, maxval = int(w), int(h), int(maxval)
    if maxval != 255:
        raise ValueError("only 8-bit images (maxval 255) are supported")
    ch = 3 if magic == b"P6" else 1
    pos += 1  # single whitespace before the raster
    raster = data[pos:pos + w * h * ch]
    if len(raster) != w * h * ch:
        raise ValueError("truncated raster")
    return np.frombuffer(raster, np.uint8).reshape(h, w, ch).copy()


def read(path) -> np.ndarray:
    with open(path, "rb") as f:
        return decode(f.read())
