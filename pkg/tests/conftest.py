import math

import numpy as np
import pytest

from animkp.transforms import KeypointFrame, MotionParams, TransformMode

ALL_MODES = list(TransformMode)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_motion(rng, mode, K=10, kp_lim=0.8, shear_lim=1.0, jac_lim=3.0, well_conditioned=True):
    """Random in-range motion parameters for ``mode``."""
    mode = TransformMode(mode)
    kps = rng.uniform(-kp_lim, kp_lim, size=(K, 2))
    kw = {}
    if mode.has_phi:
        kw["phi"] = rng.uniform(-math.pi, math.pi)
    if mode.has_shear:
        kw["shear"] = rng.uniform(-shear_lim, shear_lim, size=(K, 2))
    if mode.has_jacobians:
        if well_conditioned:
            # rotation * scale + small perturbation keeps |det| well away from 0
            jac = []
            for _ in range(K):
                a = rng.uniform(-math.pi, math.pi)
                s = rng.uniform(0.5, 2.0)
                m = s * np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
                jac.append(m + rng.uniform(-0.1, 0.1, size=(2, 2)))
            kw["jacobians"] = np.array(jac)
        else:
            kw["jacobians"] = rng.uniform(-jac_lim, jac_lim, size=(K, 2, 2))
    return MotionParams(mode, KeypointFrame(kps), **kw)


def random_image(rng, h, w, c=3):
    return rng.integers(0, 256, size=(h, w, c), dtype=np.uint8)


def bilinear_oracle(src, field):
    """Brute-force bilinear sampling via tent weights over every source pixel."""
    src = np.asarray(src, dtype=np.float64)
    if src.dtype == np.uint8:
        src = src / 255.0
    H, W, C = src.shape
    out = np.zeros(field.shape[:2] + (C,))
    for r in range(field.shape[0]):
        for c in range(field.shape[1]):
            x, y = field[r, c]
            px = min(max(((x + 1) * W - 1) / 2, 0.0), W - 1.0)
            py = min(max(((y + 1) * H - 1) / 2, 0.0), H - 1.0)
            acc = np.zeros(C)
            for i in range(H):
                wy = max(0.0, 1.0 - abs(py - i))
                if wy == 0.0:
                    continue
                for j in range(W):
                    wx = max(0.0, 1.0 - abs(px - j))
                    if wx:
                        acc += wy * wx * src[i, j]
            out[r, c] = acc
    return out


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(f"criterion {n:>2}: {results[n]}")
