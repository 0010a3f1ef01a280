"""2x2 transform algebra for keypoint Jacobians.

Matrices are plain ``(2, 2)`` float64 arrays, row-major ``[[a, b], [c, d]]``.
Keypoints live in normalized image coordinates, ``[-1, 1]`` on both axes.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateKeypoints, InvalidParameter, NearSingular

DEFAULT_NUM_KEYPOINTS = 10
DEFAULT_SINGULAR_EPS = 1e-6


class TransformMode(enum.IntEnum):
    """How the per-keypoint Jacobians are parameterized.

    The integer value is the mode code used in the binary stream header.
    """

    NO_JACOBIAN = 0
    ROT_SCALE = 1
    ROT_SCALE_SHEAR = 2
    FULL_JACOBIAN = 3

    @property
    def cli_name(self) -> str:
        return _CLI_NAMES[self]

    @classmethod
    def from_cli(cls, name: str) -> "TransformMode":
        for mode, alias in _CLI_NAMES.items():
            if alias == name:
                return mode
        raise InvalidParameter(f"unknown mode {name!r}; expected one of {sorted(_CLI_NAMES.values())}")

    @property
    def has_phi(self) -> bool:
        return self in (TransformMode.ROT_SCALE, TransformMode.ROT_SCALE_SHEAR)

    @property
    def has_shear(self) -> bool:
        return self is TransformMode.ROT_SCALE_SHEAR

    @property
    def has_jacobians(self) -> bool:
        return self is TransformMode.FULL_JACOBIAN


_CLI_NAMES = {
    TransformMode.NO_JACOBIAN: "none",
    TransformMode.ROT_SCALE: "rot-scale",
    TransformMode.ROT_SCALE_SHEAR: "rot-scale-shear",
    TransformMode.FULL_JACOBIAN: "full-jac",
}


def _finite(*values, what="parameter"):
    for v in values:
        if not math.isfinite(v):
            raise InvalidParameter(f"non-finite {what}: {v!r}")


def as_mat2(m) -> np.ndarray:
    """Validate and copy ``m`` into a finite (2, 2) float64 array."""
    arr = np.array(m, dtype=np.float64)
    if arr.shape != (2, 2):
        raise InvalidParameter(f"expected a 2x2 matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameter("matrix entries must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class KeypointFrame:
    """K keypoints of one video frame, shape ``(K, 2)`` as ``(x, y)`` rows."""

    kps: np.ndarray

    def __post_init__(self):
        kps = np.array(self.kps, dtype=np.float64)
        if kps.ndim != 2 or kps.shape[1] != 2:
            raise InvalidParameter(f"keypoints must have shape (K, 2), got {kps.shape}")
        if kps.shape[0] < 2:
            raise InvalidParameter("need at least 2 keypoints")
        if not np.all(np.isfinite(kps)):
            raise InvalidParameter("keypoints must be finite")
        if np.any(np.abs(kps) > 1.0):
            raise InvalidParameter("keypoint coordinates must lie in [-1, 1]")
        kps.setflags(write=False)
        object.__setattr__(self, "kps", kps)

    @property
    def K(self) -> int:
        return self.kps.shape[0]

    def __len__(self):
        return self.kps.shape[0]


@dataclass(frozen=True, eq=False)
class MotionParams:
    """Transmitted motion for one frame under a given :class:`TransformMode`.

    ``phi`` is required for the two rotation modes, ``shear`` (shape
    ``(K, 2)`` of ``(lambda, mu)`` pairs) for rot+scale+shear, and
    ``jacobians`` (shape ``(K, 2, 2)``) for full-Jacobian mode. Supplying a
    field the mode does not use is an error, as is omitting one it needs.
    """

    mode: TransformMode
    kp_frame: KeypointFrame
    phi: Optional[float] = None
    shear: Optional[np.ndarray] = None
    jacobians: Optional[np.ndarray] = None

    def __post_init__(self):
        mode = TransformMode(self.mode)
        object.__setattr__(self, "mode", mode)
        if not isinstance(self.kp_frame, KeypointFrame):
            object.__setattr__(self, "kp_frame", KeypointFrame(self.kp_frame))
        K = self.kp_frame.K

        for name, needed in (("phi", mode.has_phi), ("shear", mode.has_shear), ("jacobians", mode.has_jacobians)):
            present = getattr(self, name) is not None
            if needed and not present:
                raise InvalidParameter(f"mode {mode.cli_name} requires {name}")
            if present and not needed:
                raise InvalidParameter(f"mode {mode.cli_name} does not carry {name}")

        if self.phi is not None:
            phi = float(self.phi)
            _finite(phi, what="phi")
            # closed at +pi: the dequantized top code lands exactly on pi
            if not -math.pi <= phi <= math.pi:
                raise InvalidParameter(f"phi must lie in [-pi, pi], got {phi}")
            object.__setattr__(self, "phi", phi)
        if self.shear is not None:
            shear = np.array(self.shear, dtype=np.float64)
            if shear.shape != (K, 2):
                raise InvalidParameter(f"shear must have shape ({K}, 2), got {shear.shape}")
            if not np.all(np.isfinite(shear)):
                raise InvalidParameter("shear parameters must be finite")
            shear.setflags(write=False)
            object.__setattr__(self, "shear", shear)
        if self.jacobians is not None:
            jac = np.array(self.jacobians, dtype=np.float64)
            if jac.shape != (K, 2, 2):
                raise InvalidParameter(f"jacobians must have shape ({K}, 2, 2), got {jac.shape}")
            if not np.all(np.isfinite(jac)):
                raise InvalidParameter("jacobian entries must be finite")
            jac.setflags(write=False)
            object.__setattr__(self, "jacobians", jac)

    @property
    def K(self) -> int:
        return self.kp_frame.K

    @property
    def kps(self) -> np.ndarray:
        return self.kp_frame.kps


def rotation_matrix(phi: float) -> np.ndarray:
    """Counter-clockwise rotation ``[[cos, -sin], [sin, cos]]``."""
    _finite(phi, what="phi")
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s], [s, c]])


def shear_matrix(lam: float, mu: float) -> np.ndarray:
    """Unit-determinant shear ``[[1 + lam*mu, lam], [mu, 1]]``."""
    _finite(lam, mu, what="shear parameter")
    return np.array([[1.0 + lam * mu, lam], [mu, 1.0]])


def shear_inverse(lam: float, mu: float) -> np.ndarray:
    """Closed-form inverse of :func:`shear_matrix`; no division involved."""
    _finite(lam, mu, what="shear parameter")
    return np.array([[1.0, -lam], [-mu, 1.0 + lam * mu]])


def invert2x2(m, eps: float = DEFAULT_SINGULAR_EPS) -> np.ndarray:
    """Adjugate inverse of a 2x2 matrix.

    Raises :class:`NearSingular` when ``|det(m)| < eps`` instead of returning
    a numerically meaningless result.
    """
    if not eps > 0:
        raise InvalidParameter(f"eps must be positive, got {eps}")
    m = as_mat2(m)
    a, b = m[0]
    c, d = m[1]
    det = a * d - b * c
    if not abs(det) >= eps:
        raise NearSingular(det, eps)
    return np.array([[d, -b], [-c, a]]) / det


def scale_regression(kp_i, kp_p) -> float:
    """Least-squares scale of P-frame keypoints against I-frame keypoints.

    Both coordinates of all K keypoints enter one joint regression (2K
    samples), each axis centered on its own frame centroid, giving a single
    isotropic factor that ignores translation.
    """
    a = kp_i.kps if isinstance(kp_i, KeypointFrame) else KeypointFrame(kp_i).kps
    b = kp_p.kps if isinstance(kp_p, KeypointFrame) else KeypointFrame(kp_p).kps
    return regress_scale(a, b)


def regress_scale(a: np.ndarray, b: np.ndarray) -> float:
    """:func:`scale_regression` on raw ``(K, 2)`` arrays, without range checks."""
    if a.shape != b.shape:
        raise InvalidParameter(f"keypoint count mismatch: {a.shape[0]} vs {b.shape[0]}")
    da = (a - a.mean(axis=0)).ravel()
    db = (b - b.mean(axis=0)).ravel()
    denom = float(np.dot(da, da))
    if denom == 0.0 or np.all(a == a[0]):
        raise DegenerateKeypoints("I-frame keypoints have zero spread")
    return float(np.dot(da, db)) / denom


def _check_params(mode: TransformMode, params: MotionParams, keypoint_index: int):
    if TransformMode(mode) is not params.mode:
        raise InvalidParameter(f"params carry mode {params.mode.cli_name}, requested {TransformMode(mode).cli_name}")
    if not 0 <= keypoint_index < params.K:
        raise InvalidParameter(f"keypoint index {keypoint_index} out of range for K={params.K}")


def compose_jacobian(mode: TransformMode, params: MotionParams, keypoint_index: int, scf: float = 1.0) -> np.ndarray:
    """Build the Jacobian of keypoint ``keypoint_index``.

    ======================  ==================================
    mode                    result
    ======================  ==================================
    NO_JACOBIAN             identity
    ROT_SCALE               ``R(phi) * scf``
    ROT_SCALE_SHEAR         ``R(phi) @ SHR_k * scf``
    FULL_JACOBIAN           stored matrix (``scf`` ignored)
    ======================  ==================================
    """
    mode = TransformMode(mode)
    _check_params(mode, params, keypoint_index)
    _finite(scf, what="scf")
    if scf <= 0:
        raise InvalidParameter(f"scf must be positive, got {scf}")
    if mode is TransformMode.NO_JACOBIAN:
        return np.eye(2)
    if mode is TransformMode.FULL_JACOBIAN:
        return params.jacobians[keypoint_index].copy()
    jac = rotation_matrix(params.phi)
    if mode is TransformMode.ROT_SCALE_SHEAR:
        lam, mu = params.shear[keypoint_index]
        jac = jac @ shear_matrix(lam, mu)
    return jac * scf


def compose_jacobian_inverse(
    mode: TransformMode,
    params: MotionParams,
    keypoint_index: int,
    scf: float = 1.0,
    eps: float = DEFAULT_SINGULAR_EPS,
) -> np.ndarray:
    """Inverse of :func:`compose_jacobian`.

    The structured modes are inverted factor by factor: transpose of the
    rotation, closed-form shear inverse, reciprocal scale. Only full
    Jacobians go through the generic :func:`invert2x2` and can raise
    :class:`NearSingular`.
    """
    mode = TransformMode(mode)
    _check_params(mode, params, keypoint_index)
    _finite(scf, what="scf")
    if scf <= 0:
        raise InvalidParameter(f"scf must be positive, got {scf}")
    if mode is TransformMode.NO_JACOBIAN:
        return np.eye(2)
    if mode is TransformMode.FULL_JACOBIAN:
        try:
            return invert2x2(params.jacobians[keypoint_index], eps)
        except NearSingular as exc:
            raise exc.at(keypoint=keypoint_index) from None
    inv = rotation_matrix(params.phi).T
    if mode is TransformMode.ROT_SCALE_SHEAR:
        lam, mu = params.shear[keypoint_index]
        inv = shear_inverse(lam, mu) @ inv
    return inv / scf


def wrap_angle(phi: float) -> float:
    """Map an angle to ``[-pi, pi)``."""
    wrapped = math.fmod(phi + math.pi, 2.0 * math.pi)
    if wrapped < 0:
        wrapped += 2.0 * math.pi
    wrapped -= math.pi
    # fmod can land on +pi after the shift for inputs just below an odd multiple of pi
    return -math.pi if wrapped >= math.pi else wrapped


def rotation_loss_l1(phi: float, phi_ref: float) -> float:
    """Shortest angular L1 distance between a predicted and a reference roll angle."""
    _finite(phi, phi_ref, what="angle")
    return abs(wrap_angle(phi - phi_ref))
