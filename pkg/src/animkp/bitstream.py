"""Fixed-rate quantization and bit-exact serialization of P-frame motion.

Stream layout (all header integers unsigned)::

    "AKPC" | version u8 | mode u8 | K u8 | kp_bits u8 | rot_bits u8 |
    shear_bits u8 | jac_bits u8 | fps u8 | frame_count u32 LE |
    payload (MSB-first, frames back to back) | zero pad to a byte

Each frame is, in order: keypoints (x then y, ascending index), phi, then
shear pairs (lambda then mu) or Jacobian entries (row-major), ascending
keypoint index. Quantization ranges are fixed by :class:`QuantSpec` and are
not transmitted.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from . import _kernels
from .errors import BadMagic, InvalidParameter, TruncatedStream, UnsupportedVersion
from .transforms import KeypointFrame, MotionParams, TransformMode

MAGIC = b"AKPC"
VERSION = 1
_HEADER = struct.Struct("<4sBBBBBBBBI")
HEADER_SIZE = _HEADER.size


def quantize_uniform(value: float, lo: float, hi: float, bits: int) -> int:
    """Index of the nearest of ``2**bits`` levels spanning ``[lo, hi]``.

    Values are clamped first; exact ties round up.
    """
    _check_quant_args(lo, hi, bits)
    if math.isnan(value):
        raise InvalidParameter("cannot quantize NaN")
    levels = (1 << bits) - 1
    v = min(max(value, lo), hi)
    code = math.floor((v - lo) / (hi - lo) * levels + 0.5)
    return min(code, levels)


def dequantize_uniform(code: int, lo: float, hi: float, bits: int) -> float:
    _check_quant_args(lo, hi, bits)
    levels = (1 << bits) - 1
    if not 0 <= code <= levels:
        raise InvalidParameter(f"code {code} out of range for {bits} bits")
    if code == levels:
        return float(hi)
    return lo + code * (hi - lo) / levels


def _check_quant_args(lo, hi, bits):
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise InvalidParameter(f"invalid quantizer range [{lo}, {hi}]")
    if not 1 <= bits <= 16:
        raise InvalidParameter(f"bit width must be in [1, 16], got {bits}")


def _quantize_array(values, lo, hi, bits):
    levels = (1 << bits) - 1
    v = np.clip(np.asarray(values, dtype=np.float64), lo, hi)
    codes = np.floor((v - lo) / (hi - lo) * levels + 0.5)
    return np.minimum(codes, levels).astype(np.uint32)


def _dequantize_array(codes, lo, hi, bits):
    levels = (1 << bits) - 1
    codes = np.asarray(codes, dtype=np.int64)
    out = lo + codes * (hi - lo) / levels
    out[codes == levels] = hi
    return out


@dataclass(frozen=True)
class QuantSpec:
    """Bit allocation and clamp ranges for every transmitted parameter.

    The default widths put the four modes at 3.0 / 3.1 / 5.1 / 8.0 kbps for
    ten keypoints at 25 fps.
    """

    kp_bits: int = 6
    rot_bits: int = 4
    shear_bits: int = 4
    jac_bits: int = 5
    fps: int = 25
    kp_range: Tuple[float, float] = (-1.0, 1.0)
    rot_range: Tuple[float, float] = (-math.pi, math.pi)
    shear_range: Tuple[float, float] = (-2.0, 2.0)
    jac_range: Tuple[float, float] = (-4.0, 4.0)

    def __post_init__(self):
        for name in ("kp_bits", "rot_bits", "shear_bits", "jac_bits"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 1 <= v <= 16:
                raise InvalidParameter(f"{name} must be an integer in [1, 16], got {v!r}")
        if not isinstance(self.fps, (int, np.integer)) or self.fps < 1:
            raise InvalidParameter(f"fps must be a positive integer, got {self.fps!r}")
        for name in ("kp_range", "rot_range", "shear_range", "jac_range"):
            lo, hi = getattr(self, name)
            _check_quant_args(lo, hi, 1)

    def step(self, which: str) -> float:
        """Distance between adjacent reconstruction levels of ``which`` ('kp', 'rot', 'shear', 'jac')."""
        lo, hi = getattr(self, f"{which}_range")
        return (hi - lo) / ((1 << getattr(self, f"{which}_bits")) - 1)


DEFAULT_QUANT = QuantSpec()


def bits_per_frame(mode: TransformMode, K: int, quant: QuantSpec = DEFAULT_QUANT) -> int:
    mode = TransformMode(mode)
    if K < 1:
        raise InvalidParameter(f"K must be >= 1, got {K}")
    bits = 2 * K * quant.kp_bits
    if mode.has_phi:
        bits += quant.rot_bits
    if mode.has_shear:
        bits += 2 * K * quant.shear_bits
    if mode.has_jacobians:
        bits += 4 * K * quant.jac_bits
    return bits


def bitrate_kbps(mode: TransformMode, K: int, quant: QuantSpec = DEFAULT_QUANT) -> float:
    return bits_per_frame(mode, K, quant) * quant.fps / 1000.0


def savings_percent(mode: TransformMode, baseline: TransformMode, K: int, quant: QuantSpec = DEFAULT_QUANT) -> float:
    """Bitrate saved by ``mode`` relative to ``baseline``, in percent."""
    return 100.0 * (1.0 - bitrate_kbps(mode, K, quant) / bitrate_kbps(baseline, K, quant))


# --------------------------------------------------------------------------
# frame <-> codes


def _field_layout(mode: TransformMode, K: int, quant: QuantSpec):
    """(count, bits, range) for each field group, in stream order."""
    layout = [(2 * K, quant.kp_bits, quant.kp_range)]
    if mode.has_phi:
        layout.append((1, quant.rot_bits, quant.rot_range))
    if mode.has_shear:
        layout.append((2 * K, quant.shear_bits, quant.shear_range))
    if mode.has_jacobians:
        layout.append((4 * K, quant.jac_bits, quant.jac_range))
    return layout


def frame_widths(mode: TransformMode, K: int, quant: QuantSpec = DEFAULT_QUANT) -> np.ndarray:
    """Bit width of every code in one frame, in stream order."""
    return np.concatenate(
        [np.full(n, bits, dtype=np.int64) for n, bits, _ in _field_layout(TransformMode(mode), K, quant)]
    )


def frame_codes(params: MotionParams, mode: TransformMode, quant: QuantSpec = DEFAULT_QUANT) -> np.ndarray:
    """Quantization indices of one frame, in stream order."""
    mode = TransformMode(mode)
    if params.mode is not mode:
        raise InvalidParameter(f"params carry mode {params.mode.cli_name}, stream mode is {mode.cli_name}")
    groups = [params.kps.ravel()]
    if mode.has_phi:
        groups.append(np.array([params.phi]))
    if mode.has_shear:
        groups.append(params.shear.ravel())
    if mode.has_jacobians:
        groups.append(params.jacobians.ravel())
    layout = _field_layout(mode, params.K, quant)
    return np.concatenate([_quantize_array(g, lo, hi, bits) for g, (_, bits, (lo, hi)) in zip(groups, layout)])


def params_from_codes(codes, mode: TransformMode, K: int, quant: QuantSpec = DEFAULT_QUANT) -> MotionParams:
    """Inverse of :func:`frame_codes` up to quantization."""
    mode = TransformMode(mode)
    values = []
    pos = 0
    for n, bits, (lo, hi) in _field_layout(mode, K, quant):
        values.append(_dequantize_array(codes[pos:pos + n], lo, hi, bits))
        pos += n
    kps = values.pop(0).reshape(K, 2)
    kwargs = {}
    if mode.has_phi:
        kwargs["phi"] = float(values.pop(0)[0])
    if mode.has_shear:
        kwargs["shear"] = values.pop(0).reshape(K, 2)
    if mode.has_jacobians:
        kwargs["jacobians"] = values.pop(0).reshape(K, 2, 2)
    return MotionParams(mode, KeypointFrame(kps), **kwargs)


# --------------------------------------------------------------------------
# sequential bit I/O


class BitWriter:
    """Append-only MSB-first bit sink."""

    def __init__(self):
        self._buf = bytearray()
        self._acc = 0
        self._nacc = 0
        self.bits_written = 0

    def write(self, value: int, nbits: int) -> None:
        if nbits < 0 or value < 0 or value >> nbits:
            raise InvalidParameter(f"value {value} does not fit in {nbits} bits")
        self._acc = (self._acc << nbits) | value
        self._nacc += nbits
        self.bits_written += nbits
        while self._nacc >= 8:
            self._nacc -= 8
            self._buf.append((self._acc >> self._nacc) & 0xFF)
        self._acc &= (1 << self._nacc) - 1

    def getvalue(self) -> bytes:
        """Bytes written so far, the last one zero-padded."""
        tail = bytes([(self._acc << (8 - self._nacc)) & 0xFF]) if self._nacc else b""
        return bytes(self._buf) + tail


class BitReader:
    """MSB-first bit source over a bytes object."""

    def __init__(self, data: bytes, nbits: int = None):
        self._data = bytes(data)
        self.pos = 0
        self.nbits = len(self._data) * 8 if nbits is None else nbits

    @property
    def remaining(self) -> int:
        return self.nbits - self.pos

    def read(self, nbits: int) -> int:
        if nbits > self.remaining:
            raise TruncatedStream(f"need {nbits} bits, {self.remaining} left")
        v = 0
        for _ in range(nbits):
            byte = self._data[self.pos >> 3]
            v = (v << 1) | ((byte >> (7 - (self.pos & 7))) & 1)
            self.pos += 1
        return v


def encode_frame(params: MotionParams, mode: TransformMode, quant: QuantSpec, sink: BitWriter) -> None:
    """Append one frame to ``sink``; writes exactly ``bits_per_frame`` bits."""
    codes = frame_codes(params, mode, quant)
    for code, width in zip(codes.tolist(), frame_widths(mode, params.K, quant).tolist()):
        sink.write(code, width)


def decode_frame(source: BitReader, mode: TransformMode, K: int, quant: QuantSpec = DEFAULT_QUANT) -> MotionParams:
    widths = frame_widths(mode, K, quant)
    if source.remaining < int(widths.sum()):
        raise TruncatedStream(f"frame needs {int(widths.sum())} bits, {source.remaining} left")
    codes = np.array([source.read(w) for w in widths.tolist()], dtype=np.uint32)
    return params_from_codes(codes, mode, K, quant)


def iter_frames(source: BitReader, mode: TransformMode, K: int, quant: QuantSpec = DEFAULT_QUANT):
    """Decode frames until fewer than one frame's worth of bits remain."""
    bpf = bits_per_frame(mode, K, quant)
    while source.remaining >= bpf:
        yield decode_frame(source, mode, K, quant)


# --------------------------------------------------------------------------
# whole streams


@dataclass(frozen=True)
class StreamHeader:
    mode: TransformMode
    K: int
    quant: QuantSpec = DEFAULT_QUANT
    frame_count: int = 0
    version: int = VERSION
    magic: bytes = MAGIC

    def __post_init__(self):
        object.__setattr__(self, "mode", TransformMode(self.mode))
        if not 1 <= self.K <= 255:
            raise InvalidParameter(f"K must fit in one byte and be >= 1, got {self.K}")
        if self.quant.fps > 255:
            raise InvalidParameter(f"fps {self.quant.fps} does not fit in the header byte")
        if not 0 <= self.frame_count < 1 << 32:
            raise InvalidParameter(f"frame_count {self.frame_count} out of u32 range")

    @property
    def bits_per_frame(self) -> int:
        return bits_per_frame(self.mode, self.K, self.quant)

    @property
    def payload_bits(self) -> int:
        return self.frame_count * self.bits_per_frame

    def to_bytes(self) -> bytes:
        q = self.quant
        return _HEADER.pack(
            self.magic, self.version, int(self.mode), self.K,
            q.kp_bits, q.rot_bits, q.shear_bits, q.jac_bits, q.fps, self.frame_count,
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "StreamHeader":
        if len(data) < 4 or data[:4] != MAGIC:
            raise BadMagic(f"bad magic {bytes(data[:4])!r}, expected {MAGIC!r}")
        if len(data) < HEADER_SIZE:
            raise TruncatedStream(f"header needs {HEADER_SIZE} bytes, got {len(data)}")
        magic, version, mode, K, kp, rot, shear, jac, fps, count = _HEADER.unpack_from(data)
        if version != VERSION:
            raise UnsupportedVersion(f"stream version {version}, supported: {VERSION}")
        try:
            mode = TransformMode(mode)
            quant = QuantSpec(kp_bits=kp, rot_bits=rot, shear_bits=shear, jac_bits=jac, fps=fps)
            return cls(mode=mode, K=K, quant=quant, frame_count=count)
        except (ValueError, InvalidParameter) as exc:
            raise InvalidParameter(f"corrupt header: {exc}") from None


@dataclass(frozen=True)
class MotionBitstream:
    header: StreamHeader
    payload: bytes = field(repr=False)

    def to_bytes(self) -> bytes:
        return self.header.to_bytes() + self.payload


def write_stream(frames: List[MotionParams], header: StreamHeader) -> MotionBitstream:
    """Quantize and pack ``frames``; ``header.frame_count`` is set from the list."""
    header = StreamHeader(header.mode, header.K, header.quant, len(frames))
    for i, p in enumerate(frames):
        if p.K != header.K:
            raise InvalidParameter(f"frame {i} has K={p.K}, header says {header.K}")
    if not frames:
        return MotionBitstream(header, b"")
    codes = np.concatenate([frame_codes(p, header.mode, header.quant) for p in frames])
    widths = np.tile(frame_widths(header.mode, header.K, header.quant), len(frames))
    payload = _kernels.pack_codes(codes, widths).tobytes()
    return MotionBitstream(header, payload)


def read_codes(data: bytes) -> Tuple[StreamHeader, np.ndarray]:
    """Parse a stream into its header and a ``(frame_count, codes_per_frame)`` index array."""
    header = StreamHeader.from_bytes(data)
    payload = np.frombuffer(data, dtype=np.uint8, offset=HEADER_SIZE)
    bpf = header.bits_per_frame
    available = payload.size * 8
    if available < header.payload_bits:
        bad = available // bpf
        raise TruncatedStream(
            f"stream ends inside frame {bad}: {header.frame_count} frames need "
            f"{header.payload_bits} bits, payload has {available}",
            frame=bad,
        )
    widths = frame_widths(header.mode, header.K, header.quant)
    all_widths = np.tile(widths, header.frame_count)
    codes = _kernels.unpack_codes(payload, all_widths) if header.frame_count else np.zeros(0, np.uint32)
    return header, codes.reshape(header.frame_count, widths.size)


def read_stream(data: bytes) -> Tuple[StreamHeader, List[MotionParams]]:
    header, codes = read_codes(data)
    frames = [params_from_codes(row, header.mode, header.K, header.quant) for row in codes]
    return header, frames
