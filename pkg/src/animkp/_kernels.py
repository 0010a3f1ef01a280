"""Hot inner loops: bilinear resampling and variable-width bit packing.

Every kernel has a pure-numpy version (``*_numpy``) and, when numba is
importable, a compiled version (``*_numba``). The public names
(``bilinear_sample``, ``pack_codes``, ``unpack_codes``) point at the numba
version unless ``ANIMKP_DISABLE_NUMBA`` is set. Both paths must produce
identical results; the test suite checks this.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

# --------------------------------------------------------------------------
# bilinear sampling
#
# src: (H, W, C) float64, grid: (Ho, Wo, 2) float64 normalized (x, y)
# pixel-center convention, border clamp


def bilinear_sample_numpy(src, grid):
    H, W, C = src.shape
    px = ((grid[..., 0] + 1.0) * W - 1.0) * 0.5
    py = ((grid[..., 1] + 1.0) * H - 1.0) * 0.5
    px = np.clip(px, 0.0, W - 1.0)
    py = np.clip(py, 0.0, H - 1.0)
    x0 = np.minimum(np.floor(px).astype(np.intp), max(W - 2, 0))
    y0 = np.minimum(np.floor(py).astype(np.intp), max(H - 2, 0))
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    wx = (px - x0)[..., None]
    wy = (py - y0)[..., None]
    top = src[y0, x0] * (1.0 - wx) + src[y0, x1] * wx
    bot = src[y1, x0] * (1.0 - wx) + src[y1, x1] * wx
    return top * (1.0 - wy) + bot * wy


def _bilinear_sample_loop(src, grid):
    H, W, C = src.shape
    Ho, Wo = grid.shape[0], grid.shape[1]
    out = np.empty((Ho, Wo, C), dtype=np.float64)
    xmax = max(W - 2, 0)
    ymax = max(H - 2, 0)
    for r in range(Ho):
        for c in range(Wo):
            px = ((grid[r, c, 0] + 1.0) * W - 1.0) * 0.5
            py = ((grid[r, c, 1] + 1.0) * H - 1.0) * 0.5
            px = min(max(px, 0.0), W - 1.0)
            py = min(max(py, 0.0), H - 1.0)
            x0 = min(int(np.floor(px)), xmax)
            y0 = min(int(np.floor(py)), ymax)
            x1 = min(x0 + 1, W - 1)
            y1 = min(y0 + 1, H - 1)
            wx = px - x0
            wy = py - y0
            for ch in range(C):
                top = src[y0, x0, ch] * (1.0 - wx) + src[y0, x1, ch] * wx
                bot = src[y1, x0, ch] * (1.0 - wx) + src[y1, x1, ch] * wx
                out[r, c, ch] = top * (1.0 - wy) + bot * wy
    return out


bilinear_sample_numba = njit(_bilinear_sample_loop)


# --------------------------------------------------------------------------
# MSB-first packing of unsigned codes with per-code bit widths


def pack_codes_numpy(codes, widths):
    codes = np.asarray(codes, dtype=np.uint32)
    widths = np.asarray(widths, dtype=np.int64)
    total = int(widths.sum())
    if total == 0:
        return np.zeros(0, dtype=np.uint8)
    owner = np.repeat(np.arange(codes.size), widths)
    starts = np.cumsum(widths) - widths
    shift = (widths[owner] - 1 - (np.arange(total) - starts[owner])).astype(np.uint32)
    bits = ((codes[owner] >> shift) & 1).astype(np.uint8)
    return np.packbits(bits)


def unpack_codes_numpy(data, widths, bit_offset=0):
    # widths are all >= 1 (QuantSpec invariant), so reduceat segments are non-empty
    data = np.asarray(data, dtype=np.uint8)
    widths = np.asarray(widths, dtype=np.int64)
    if widths.size == 0:
        return np.zeros(0, dtype=np.uint32)
    total = int(widths.sum())
    bits = np.unpackbits(data)[bit_offset:bit_offset + total].astype(np.uint32)
    owner = np.repeat(np.arange(widths.size), widths)
    starts = np.cumsum(widths) - widths
    shift = (widths[owner] - 1 - (np.arange(total) - starts[owner])).astype(np.uint32)
    return np.add.reduceat(bits << shift, starts).astype(np.uint32)


def _pack_codes_loop(codes, widths):
    total = 0
    for w in widths:
        total += w
    out = np.zeros((total + 7) // 8, dtype=np.uint8)
    pos = 0
    for i in range(codes.size):
        code = codes[i]
        for b in range(widths[i] - 1, -1, -1):
            if (code >> b) & 1:
                out[pos >> 3] |= np.uint8(0x80 >> (pos & 7))
            pos += 1
    return out


def _unpack_codes_loop(data, widths, bit_offset):
    out = np.zeros(widths.size, dtype=np.uint32)
    pos = bit_offset
    for i in range(widths.size):
        v = 0
        for _ in range(widths[i]):
            v = (v << 1) | ((data[pos >> 3] >> (7 - (pos & 7))) & 1)
            pos += 1
        out[i] = v
    return out


_pack_codes_jit = njit(_pack_codes_loop)
_unpack_codes_jit = njit(_unpack_codes_loop)


def pack_codes_numba(codes, widths):
    return _pack_codes_jit(np.ascontiguousarray(codes, dtype=np.uint32), np.ascontiguousarray(widths, dtype=np.int64))


def unpack_codes_numba(data, widths, bit_offset=0):
    return _unpack_codes_jit(
        np.ascontiguousarray(data, dtype=np.uint8), np.ascontiguousarray(widths, dtype=np.int64), int(bit_offset)
    )


if USE_NUMBA:
    bilinear_sample = bilinear_sample_numba
    pack_codes = pack_codes_numba
    unpack_codes = unpack_codes_numba
    BACKEND = "numba"
else:
    bilinear_sample = bilinear_sample_numpy
    pack_codes = pack_codes_numpy
    unpack_codes = unpack_codes_numpy
    BACKEND = "numpy"
