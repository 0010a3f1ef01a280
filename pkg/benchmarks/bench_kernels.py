"""Compare the numba and numpy kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]

Both variants are imported directly, so ANIMKP_DISABLE_NUMBA does not matter
here. The first numba call (compilation or cache load) is excluded.
"""
import argparse
import timeit

import numpy as np

from animkp import _kernels
from animkp.bitstream import DEFAULT_QUANT, frame_widths
from animkp.transforms import TransformMode


def _time(fn, repeat):
    fn()  # warm-up
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels.bilinear_sample_numba is None:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(0)

    cases = []
    for size in (64, 256, 512):
        src = rng.uniform(size=(size, size, 3))
        grid = rng.uniform(-1.1, 1.1, size=(size, size, 2))
        cases.append((f"bilinear {size}x{size}", lambda s=src, g=grid: _kernels.bilinear_sample_numpy(s, g),
                      lambda s=src, g=grid: _kernels.bilinear_sample_numba(s, g)))

    for frames in (90, 10_000):
        widths = np.tile(frame_widths(TransformMode.FULL_JACOBIAN, 10, DEFAULT_QUANT), frames).astype(np.int64)
        codes = (rng.integers(0, 1 << 30, size=widths.size) & ((1 << widths) - 1)).astype(np.uint32)
        packed = _kernels.pack_codes_numpy(codes, widths)
        assert np.array_equal(packed, _kernels.pack_codes_numba(codes, widths))
        cases.append((f"pack {frames} frames", lambda c=codes, w=widths: _kernels.pack_codes_numpy(c, w),
                      lambda c=codes, w=widths: _kernels.pack_codes_numba(c, w)))
        cases.append((f"unpack {frames} frames", lambda p=packed, w=widths: _kernels.unpack_codes_numpy(p, w),
                      lambda p=packed, w=widths: _kernels.unpack_codes_numba(p, w)))

    print(f"{'kernel':<24} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for name, f_np, f_nb in cases:
        t_np, t_nb = _time(f_np, args.repeat), _time(f_nb, args.repeat)
        print(f"{name:<24} {t_np * 1e3:>10.3f} {t_nb * 1e3:>10.3f} {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
