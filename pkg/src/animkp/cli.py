"""``animkp`` command-line interface.

Exit codes:
    0  success
    1  malformed input, I/O failure, bad or truncated stream
    2  trace fields do not match ``--mode``
    3  numerical failure while animating (near-singular Jacobian, degenerate keypoints)
    4  gn-check: normalized Lipschitz estimate above 1 + 1e-3
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bitstream as bs
from .errors import DegenerateKeypoints, NearSingular, StreamError
from .gradnorm import ScalarNet, empirical_lipschitz
from .metrics import psnr, ssim
from .pnm import PNMError, read_pnm, write_pnm
from .trace import TraceError, TraceModeMismatch, dump_trace, load_trace
from .transforms import DEFAULT_NUM_KEYPOINTS, DEFAULT_SINGULAR_EPS, TransformMode
from .warpfield import DEFAULT_SIGMA, animate_frame

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_MODE = 2
EXIT_NUMERIC = 3
EXIT_GN = 4

GN_TOLERANCE = 1e-3
MODE_CHOICES = [m.cli_name for m in TransformMode]


def _err(msg):
    print(f"animkp: {msg}", file=sys.stderr)


def _quant_from_args(args) -> bs.QuantSpec:
    return bs.QuantSpec(
        kp_bits=args.kp_bits, rot_bits=args.rot_bits, shear_bits=args.shear_bits, jac_bits=args.jac_bits, fps=args.fps
    )


def _add_quant_flags(p):
    d = bs.DEFAULT_QUANT
    p.add_argument("--kp-bits", type=int, default=d.kp_bits, help="bits per keypoint coordinate (default %(default)s)")
    p.add_argument("--rot-bits", type=int, default=d.rot_bits, help="bits for the global rotation (default %(default)s)")
    p.add_argument("--shear-bits", type=int, default=d.shear_bits, help="bits per shear parameter (default %(default)s)")
    p.add_argument("--jac-bits", type=int, default=d.jac_bits, help="bits per Jacobian entry (default %(default)s)")
    p.add_argument("--fps", type=int, default=d.fps, help="frames per second (default %(default)s)")


def cmd_encode(args) -> int:
    mode = TransformMode.from_cli(args.mode)
    try:
        quant = _quant_from_args(args)
        text = Path(args.trace).read_text()
        frames = load_trace(text, mode)
        stream = bs.write_stream(frames, bs.StreamHeader(mode, frames[0].K, quant))
        Path(args.out).write_bytes(stream.to_bytes())
    except TraceModeMismatch as exc:
        _err(str(exc))
        return EXIT_MODE
    except (OSError, TraceError, ValueError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    h = stream.header
    print(f"frames: {h.frame_count}")
    print(f"bits/frame: {h.bits_per_frame}")
    print(f"kbps: {bs.bitrate_kbps(mode, h.K, quant):.3f}")
    return EXIT_OK


def _read_stream_file(path):
    return bs.read_stream(Path(path).read_bytes())


def cmd_decode(args) -> int:
    try:
        header, frames = _read_stream_file(args.stream)
    except (OSError, StreamError, ValueError) as exc:
        _err(_stream_diag(exc))
        return EXIT_INPUT
    text = dump_trace(frames)
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            _err(str(exc))
            return EXIT_INPUT
    return EXIT_OK


def _stream_diag(exc) -> str:
    frame = getattr(exc, "frame", None)
    prefix = f"frame {frame}: " if frame is not None else ""
    return f"{prefix}{type(exc).__name__}: {exc}"


def cmd_animate(args) -> int:
    try:
        iframe = read_pnm(args.iframe)
        header, frames = _read_stream_file(args.stream)
    except (OSError, PNMError, StreamError, ValueError) as exc:
        _err(_stream_diag(exc))
        return EXIT_INPUT
    if not frames:
        _err("stream has no frames")
        return EXIT_INPUT
    if args.all:
        indices = range(len(frames))
    else:
        if not 0 <= args.frame < len(frames):
            _err(f"frame {args.frame} out of range (stream has {len(frames)})")
            return EXIT_INPUT
        indices = [args.frame]
    outdir = Path(args.out)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        _err(str(exc))
        return EXIT_INPUT
    ext = "ppm" if iframe.shape[2] == 3 else "pgm"
    reference = frames[0]
    for idx in indices:
        try:
            out = animate_frame(iframe, reference, frames[idx], header.mode, args.sigma, args.eps)
        except NearSingular as exc:
            _err(f"near-singular Jacobian: {exc.at(frame=idx)}")
            return EXIT_NUMERIC
        except DegenerateKeypoints as exc:
            _err(f"frame {idx}: {exc}")
            return EXIT_NUMERIC
        path = outdir / f"frame_{idx:04d}.{ext}"
        try:
            write_pnm(path, out)
        except OSError as exc:
            _err(str(exc))
            return EXIT_INPUT
        print(path)
    return EXIT_OK


def cmd_bitrate(args) -> int:
    try:
        quant = _quant_from_args(args)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_INPUT
    modes = list(TransformMode) if args.mode == "all" else [TransformMode.from_cli(args.mode)]
    base = TransformMode.FULL_JACOBIAN
    print(f"{'mode':<16} {'bits/frame':>10} {'kbps':>8} {'savings vs full-jac':>20}")
    for m in modes:
        bits = bs.bits_per_frame(m, args.keypoints, quant)
        kbps = bs.bitrate_kbps(m, args.keypoints, quant)
        save = bs.savings_percent(m, base, args.keypoints, quant)
        print(f"{m.cli_name:<16} {bits:>10d} {kbps:>8.3f} {save:>19.2f}%")
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        a = read_pnm(args.a)
        b = read_pnm(args.b)
        p = psnr(a, b)
        s = ssim(a, b)
    except (OSError, PNMError, ValueError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    print(f"PSNR: {p:.4f} dB")
    print(f"SSIM: {s:.6f}")
    return EXIT_OK


def cmd_gn_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    sizes = [args.dim] + [args.hidden] * args.layers + [1]
    net = ScalarNet.random(rng, sizes, weight_scale=args.weight_scale, activation=args.activation)
    raw = empirical_lipschitz(net, False, args.pairs, (-2.0, 2.0), args.seed)
    print(f"raw Lipschitz estimate: {raw:.6f}")
    if args.no_normalize:
        return EXIT_OK
    gn = empirical_lipschitz(net, True, args.pairs, (-2.0, 2.0), args.seed)
    print(f"normalized Lipschitz estimate: {gn:.6f}")
    if gn > 1.0 + GN_TOLERANCE:
        _err(f"normalized estimate {gn:.6f} exceeds {1.0 + GN_TOLERANCE}")
        return EXIT_GN
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="animkp", description="Keypoint animation motion codec.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="quantize a keypoint trace into a motion bitstream")
    p.add_argument("trace")
    p.add_argument("--mode", choices=MODE_CHOICES, required=True)
    p.add_argument("--out", required=True)
    _add_quant_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="dequantize a motion bitstream into a trace")
    p.add_argument("stream")
    p.add_argument("--out", default="-", help="output trace path, '-' for stdout")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("animate", help="warp an I-frame according to a motion bitstream")
    p.add_argument("iframe")
    p.add_argument("stream")
    which = p.add_mutually_exclusive_group()
    which.add_argument("--frame", type=int, default=0)
    which.add_argument("--all", action="store_true")
    p.add_argument("--sigma", type=float, default=DEFAULT_SIGMA)
    p.add_argument("--eps", type=float, default=DEFAULT_SINGULAR_EPS)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_animate)

    p = sub.add_parser("bitrate", help="print analytic bitrates per mode")
    p.add_argument("--mode", choices=MODE_CHOICES + ["all"], default="all")
    p.add_argument("-k", "--keypoints", type=int, default=DEFAULT_NUM_KEYPOINTS)
    _add_quant_flags(p)
    p.set_defaults(func=cmd_bitrate)

    p = sub.add_parser("compare", help="PSNR and SSIM between two images")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gn-check", help="empirical Lipschitz check of gradient normalization")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pairs", type=int, default=10_000)
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--weight-scale", type=float, default=4.0)
    p.add_argument("--activation", choices=["tanh", "relu"], default="tanh")
    p.add_argument("--no-normalize", action="store_true")
    p.set_defaults(func=cmd_gn_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
