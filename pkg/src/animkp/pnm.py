"""Minimal binary PPM (P6) and PGM (P5) reader/writer, 8-bit only."""
from __future__ import annotations

import re

import numpy as np

_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*(\S+)")


class PNMError(ValueError):
    pass


def _header_tokens(data: bytes, count: int):
    pos = 0
    tokens = []
    for _ in range(count):
        m = _TOKEN.match(data, pos)
        if not m:
            raise PNMError("truncated header")
        tokens.append(m.group(1))
        pos = m.end()
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise PNMError("missing whitespace after header")
    return tokens, pos + 1


def decode_pnm(data: bytes) -> np.ndarray:
    """Decode P6 to ``(H, W, 3)`` or P5 to ``(H, W, 1)`` uint8."""
    tokens, start = _header_tokens(data, 4)
    magic = tokens[0]
    if magic not in (b"P6", b"P5"):
        raise PNMError(f"unsupported format {magic!r}; only P6/P5 are read")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise PNMError("non-integer header field") from None
    if width < 1 or height < 1:
        raise PNMError(f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise PNMError(f"only maxval 255 is supported, got {maxval}")
    channels = 3 if magic == b"P6" else 1
    n = width * height * channels
    raster = data[start:start + n]
    if len(raster) != n:
        raise PNMError(f"raster has {len(raster)} bytes, expected {n}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width, channels).copy()


def encode_pnm(img) -> bytes:
    arr = np.asarray(img)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.dtype != np.uint8 or arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise PNMError(f"need uint8 (H, W[, 1|3]) image, got {arr.dtype} {arr.shape}")
    magic = b"P6" if arr.shape[2] == 3 else b"P5"
    h, w = arr.shape[:2]
    return magic + b"\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(arr).tobytes()


def read_pnm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_pnm(fh.read())


def write_pnm(path, img) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pnm(img))
