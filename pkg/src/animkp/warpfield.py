"""Dense warp grids, patch blending and bilinear resampling.

Shapes used throughout:

* image   -- ``(H, W, C)`` array, ``C`` in {1, 3}; uint8 for storage,
  float64 in ``[0, 1]`` while processing. ``(H, W)`` is accepted as ``C = 1``.
* field   -- ``(H, W, 2)`` float64 array of normalized ``(x, y)`` sampling
  positions, ``-1`` and ``+1`` being the outer edges of the source image.
* weights -- ``(H, W)`` nonnegative float64 array.

Grid points are column vectors: a 2x2 matrix ``M`` acts as ``M @ v``.
"""
from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .errors import DegenerateKeypoints, InvalidParameter, NearSingular
from .transforms import (
    DEFAULT_SINGULAR_EPS,
    MotionParams,
    TransformMode,
    as_mat2,
    compose_jacobian,
    compose_jacobian_inverse,
    invert2x2,
    regress_scale,
    rotation_matrix,
)

DEFAULT_SIGMA = 0.1


def as_float_image(img) -> np.ndarray:
    """Return ``img`` as a contiguous ``(H, W, C)`` float64 array in [0, 1]."""
    arr = np.asarray(img)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise InvalidParameter(f"image must be (H, W), (H, W, 1) or (H, W, 3), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidParameter("image must be nonempty")
    if arr.dtype == np.uint8:
        return np.ascontiguousarray(arr, dtype=np.float64) / 255.0
    return np.ascontiguousarray(arr, dtype=np.float64)


def to_uint8(img) -> np.ndarray:
    """Quantize a [0, 1] float image to 8 bits, rounding half away from zero."""
    scaled = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * 255.0
    # values are nonnegative, so floor(x + 0.5) is round-half-away-from-zero
    return np.floor(scaled + 0.5).astype(np.uint8)


def _check_field(field) -> np.ndarray:
    f = np.asarray(field, dtype=np.float64)
    if f.ndim != 3 or f.shape[2] != 2:
        raise InvalidParameter(f"warp field must have shape (H, W, 2), got {f.shape}")
    if not np.all(np.isfinite(f)):
        raise InvalidParameter("warp field contains non-finite coordinates")
    return f


def neutral_grid(height: int, width: int) -> np.ndarray:
    """Identity field: every pixel samples its own center."""
    if height < 1 or width < 1:
        raise InvalidParameter(f"grid dimensions must be >= 1, got {height}x{width}")
    xs = -1.0 + (2.0 * np.arange(width) + 1.0) / width
    ys = -1.0 + (2.0 * np.arange(height) + 1.0) / height
    grid = np.empty((height, width, 2))
    grid[..., 0] = xs[None, :]
    grid[..., 1] = ys[:, None]
    return grid


def keypoint_warp_grid(neutral, kp_i, kp_p, jac_i, jac_p, eps=DEFAULT_SINGULAR_EPS, jac_p_inv=None):
    """Warp grid for one keypoint patch.

    Each grid point ``v`` maps to ``jac_i @ inv(jac_p) @ (v - kp_p) + kp_i``.
    ``jac_p_inv`` may be passed when a closed-form inverse is known; otherwise
    ``jac_p`` is inverted with :func:`invert2x2` and may raise
    :class:`NearSingular`.
    """
    neutral = _check_field(neutral)
    kp_i = np.asarray(kp_i, dtype=np.float64).reshape(2)
    kp_p = np.asarray(kp_p, dtype=np.float64).reshape(2)
    inv_p = invert2x2(jac_p, eps) if jac_p_inv is None else as_mat2(jac_p_inv)
    m = as_mat2(jac_i) @ inv_p
    return (neutral - kp_p) @ m.T + kp_i


def bilinear_sample(src, field) -> np.ndarray:
    """Resample ``src`` at the normalized positions in ``field``.

    Output has the field's height and width and the source's channel count,
    as float64. Positions outside the image are clamped to the border.
    """
    src = as_float_image(src)
    field = np.ascontiguousarray(_check_field(field))
    return _kernels.bilinear_sample(src, field)


def gaussian_weight_map(kp, height: int, width: int, sigma: float = DEFAULT_SIGMA) -> np.ndarray:
    """Unnormalized Gaussian bump around ``kp`` on the neutral lattice."""
    if not sigma > 0 or not math.isfinite(sigma):
        raise InvalidParameter(f"sigma must be positive and finite, got {sigma}")
    grid = neutral_grid(height, width)
    d2 = np.sum((grid - np.asarray(kp, dtype=np.float64).reshape(2)) ** 2, axis=-1)
    return np.exp(-d2 / (2.0 * sigma * sigma))


def blend_warp_fields(fields, weights, background) -> np.ndarray:
    """Per-pixel convex combination of keypoint fields and a background field.

    The background receives ``max(0, 1 - sum(weights))`` before all weights
    are normalized to sum to one.
    """
    background = _check_field(background)
    shape = background.shape[:2]
    if len(fields) != len(weights):
        raise InvalidParameter(f"{len(fields)} fields but {len(weights)} weight maps")
    num = background.copy()
    if not fields:
        return num
    fs = np.stack([_check_field(f) for f in fields])
    ws = np.stack([np.asarray(w, dtype=np.float64) for w in weights])
    if fs.shape[1:3] != shape or ws.shape[1:] != shape:
        raise InvalidParameter("fields and weight maps must share the background's dimensions")
    if not np.all(np.isfinite(ws)) or np.any(ws < 0):
        raise InvalidParameter("weights must be finite and nonnegative")
    wsum = ws.sum(axis=0)
    bg = np.maximum(0.0, 1.0 - wsum)
    total = wsum + bg
    num = np.einsum("khw,khwc->hwc", ws, fs) + bg[..., None] * background
    return num / total[..., None]


def _rotate_points(points, angle):
    return points @ rotation_matrix(angle).T


def motion_scale(motion_i: MotionParams, motion_p: MotionParams) -> float:
    """Decoder-side scale factor of the P-frame relative to the I-frame.

    In the rotation modes the I-frame keypoints are first turned by the
    transmitted roll difference so that rotation does not leak into the
    regressed scale (an unrotated regression collapses towards zero as the
    roll difference approaches 90 degrees). Without a roll difference this is
    exactly :func:`scale_regression`.
    """
    kps_i = motion_i.kps
    if motion_i.mode.has_phi:
        dphi = motion_p.phi - motion_i.phi
        if dphi != 0.0:
            kps_i = _rotate_points(kps_i, dphi)
    return regress_scale(kps_i, motion_p.kps)


def animate_frame(
    iframe,
    motion_i: MotionParams,
    motion_p: MotionParams,
    mode: TransformMode,
    sigma: float = DEFAULT_SIGMA,
    eps: float = DEFAULT_SINGULAR_EPS,
) -> np.ndarray:
    """Warp ``iframe`` from its own motion ``motion_i`` to ``motion_p``.

    Returns a uint8 ``(H, W, C)`` image. Raises :class:`NearSingular`
    (annotated with the keypoint index) when a full Jacobian cannot be
    inverted, and :class:`DegenerateKeypoints` when no positive scale can be
    regressed.
    """
    mode = TransformMode(mode)
    for m in (motion_i, motion_p):
        if m.mode is not mode:
            raise InvalidParameter(f"motion carries mode {m.mode.cli_name}, expected {mode.cli_name}")
    if motion_i.K != motion_p.K:
        raise InvalidParameter(f"keypoint count mismatch: {motion_i.K} vs {motion_p.K}")

    src = as_float_image(iframe)
    H, W = src.shape[:2]
    neutral = neutral_grid(H, W)

    scf = 1.0
    if mode.has_phi:
        scf = motion_scale(motion_i, motion_p)
        if not scf > 0:
            raise DegenerateKeypoints(f"regressed scale {scf:.3g} is not positive")

    fields, weights = [], []
    for k in range(motion_p.K):
        jac_i = compose_jacobian(mode, motion_i, k, 1.0)
        jac_p = compose_jacobian(mode, motion_p, k, scf)
        try:
            jac_p_inv = compose_jacobian_inverse(mode, motion_p, k, scf, eps)
        except NearSingular as exc:
            raise exc.at(keypoint=k) from None
        fields.append(keypoint_warp_grid(neutral, motion_i.kps[k], motion_p.kps[k], jac_i, jac_p, eps, jac_p_inv))
        weights.append(gaussian_weight_map(motion_p.kps[k], H, W, sigma))

    field = blend_warp_fields(fields, weights, neutral)
    return to_uint8(bilinear_sample(src, field))
