"""Keypoint trace files: one JSON object per line.

Example record (rot-scale-shear, K = 2)::

    {"frame": 0, "kps": [[0.1, -0.2], [0.3, 0.4]], "phi": 0.05,
     "shear": [[0.0, 0.1], [0.2, 0.0]]}

Full-Jacobian records carry ``"jacobians": [[[a, b], [c, d]], ...]``.
Frame indices start at 0 and increase by one; every record has the same K
and the same set of fields.
"""
from __future__ import annotations

import json
from typing import List

from .transforms import KeypointFrame, MotionParams, TransformMode

OPTIONAL_FIELDS = ("phi", "shear", "jacobians")


class TraceError(ValueError):
    """The trace text is malformed."""


class TraceModeMismatch(ValueError):
    """The trace is well formed but its fields do not fit the requested mode."""


def _mode_fields(mode: TransformMode):
    return {name for name, on in zip(OPTIONAL_FIELDS, (mode.has_phi, mode.has_shear, mode.has_jacobians)) if on}


def parse_records(text: str) -> List[dict]:
    records = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceError(f"line {lineno}: {exc.msg}") from None
        if not isinstance(rec, dict) or "frame" not in rec or "kps" not in rec:
            raise TraceError(f"line {lineno}: record needs 'frame' and 'kps'")
        unknown = set(rec) - {"frame", "kps", *OPTIONAL_FIELDS}
        if unknown:
            raise TraceError(f"line {lineno}: unknown fields {sorted(unknown)}")
        if rec["frame"] != len(records):
            raise TraceError(f"line {lineno}: expected frame {len(records)}, got {rec['frame']!r}")
        records.append(rec)
    if not records:
        raise TraceError("trace is empty")
    fields = set(records[0]) - {"frame", "kps"}
    K = len(records[0]["kps"])
    for rec in records[1:]:
        if set(rec) - {"frame", "kps"} != fields:
            raise TraceError(f"frame {rec['frame']}: field set differs from frame 0")
        if len(rec["kps"]) != K:
            raise TraceError(f"frame {rec['frame']}: has {len(rec['kps'])} keypoints, frame 0 has {K}")
    return records


def records_to_params(records: List[dict], mode: TransformMode) -> List[MotionParams]:
    mode = TransformMode(mode)
    present = set(records[0]) & set(OPTIONAL_FIELDS)
    wanted = _mode_fields(mode)
    if present != wanted:
        raise TraceModeMismatch(
            f"mode {mode.cli_name} needs fields {sorted(wanted) or 'none'}, trace has {sorted(present) or 'none'}"
        )
    out = []
    for rec in records:
        try:
            out.append(
                MotionParams(
                    mode,
                    KeypointFrame(rec["kps"]),
                    phi=rec.get("phi"),
                    shear=rec.get("shear"),
                    jacobians=rec.get("jacobians"),
                )
            )
        except (ValueError, TypeError) as exc:
            raise TraceError(f"frame {rec['frame']}: {exc}") from None
    return out


def load_trace(text: str, mode: TransformMode) -> List[MotionParams]:
    return records_to_params(parse_records(text), mode)


def dump_trace(frames: List[MotionParams]) -> str:
    lines = []
    for i, p in enumerate(frames):
        rec = {"frame": i, "kps": p.kps.tolist()}
        if p.phi is not None:
            rec["phi"] = p.phi
        if p.shear is not None:
            rec["shear"] = p.shear.tolist()
        if p.jacobians is not None:
            rec["jacobians"] = p.jacobians.tolist()
        lines.append(json.dumps(rec))
    return "\n".join(lines) + "\n"
