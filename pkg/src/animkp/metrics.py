"""Full-reference frame quality: PSNR and single-scale SSIM.

Images are ``(H, W)`` or ``(H, W, C)`` arrays; uint8 input is scaled to
[0, 1], float input is taken as already in [0, 1].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import InvalidParameter
from .warpfield import as_float_image

PSNR_CAP_DB = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass
class MetricReport:
    psnr_db: float
    ssim: float
    per_frame: Optional[List[tuple]] = field(default=None)


def _pair(a, b):
    a = as_float_image(a)
    b = as_float_image(b)
    if a.shape != b.shape:
        raise InvalidParameter(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b) -> float:
    """PSNR in dB with peak 1.0, capped at 99 dB for identical inputs."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, max(0.0, 10.0 * math.log10(1.0 / mse)))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 1-D Gaussian taps."""
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img, taps):
    # separable 'valid' correlation over the two spatial axes of (H, W, C)
    n = taps.size
    H, W = img.shape[:2]
    rows = sum(taps[i] * img[i:H - n + 1 + i] for i in range(n))
    return sum(taps[i] * rows[:, i:W - n + 1 + i] for i in range(n))


def ssim(a, b) -> float:
    """Mean SSIM over all fully-contained 11x11 Gaussian windows, averaged over channels."""
    a, b = _pair(a, b)
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise InvalidParameter(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape[:2]}")
    taps = gaussian_window()
    c1 = (SSIM_K1 * 1.0) ** 2
    c2 = (SSIM_K2 * 1.0) ** 2
    mu_a = _filter_valid(a, taps)
    mu_b = _filter_valid(b, taps)
    var_a = _filter_valid(a * a, taps) - mu_a * mu_a
    var_b = _filter_valid(b * b, taps) - mu_b * mu_b
    cov = _filter_valid(a * b, taps) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.clip(np.mean(num / den), -1.0, 1.0))


def compare(a, b) -> MetricReport:
    return MetricReport(psnr_db=psnr(a, b), ssim=ssim(a, b))
