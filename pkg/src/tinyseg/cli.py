"""Command-line interface: batch detection and the service launcher.

    tinyseg detect <inputs...> -o DIR [--threshold T] [--dilation K]
                   [--detector SPEC] [--overwrite] [--jobs N]
    tinyseg serve [--port P] [--host H] [--detector SPEC] [--static DIR]
    tinyseg golden -o DIR [--seed N]

Exit codes: 0 all files processed, 1 any per-file failure, 2 bad arguments.
"""

from __future__ import annotations

import argparse
import glob
import os
import socket
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import golden as goldenmod
from .detect import parse_detector_spec
from .errors import TinysegError
from .workflow import process_bytes


def _threshold_arg(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"threshold {value} outside [0, 1]")
    return value


def _dilation_arg(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("dilation must be >= 0")
    return value


def _detector_arg(text: str):
    try:
        return parse_detector_spec(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tinyseg")
    sub = parser.add_subparsers(dest="command", required=True)

    det = sub.add_parser("detect", help="batch-detect and append mask extensions")
    det.add_argument("inputs", nargs="+", help="FITS/NPY files or globs")
    det.add_argument("-o", "--output-dir", required=True)
    det.add_argument("--threshold", type=_threshold_arg, default=0.5)
    det.add_argument("--dilation", type=_dilation_arg, default=0)
    det.add_argument("--detector", type=_detector_arg, default="baseline")
    det.add_argument("--ext-name", default="SEG_MASK")
    det.add_argument("--overwrite", action="store_true")
    det.add_argument("--jobs", type=int, default=min(4, os.cpu_count() or 1))

    srv = sub.add_parser("serve", help="run the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=None)
    srv.add_argument("--detector", default=None)
    srv.add_argument("--static", default=None, help="web UI asset directory")

    gold = sub.add_parser("golden", help="export the client conformance suite")
    gold.add_argument("-o", "--output-dir", required=True)
    gold.add_argument("--seed", type=int, default=goldenmod.SUITE_SEED)
    return parser


def _expand_inputs(patterns: list[str]) -> list[str]:
    """Globs expand (sorted); literal paths pass through even if missing so
    the per-file report can name them."""
    out: list[str] = []
    for pattern in patterns:
        if any(ch in pattern for ch in "*?["):
            matches = sorted(glob.glob(pattern))
            out.extend(matches if matches else [pattern])
        else:
            out.append(pattern)
    return out


def _process_one(path: str, args) -> tuple[str, str | None]:
    """Returns (report line, error or None)."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        return f"{path}: error: {exc}", str(exc)
    out_path = Path(args.output_dir) / f"{Path(path).stem}_masked.fits"
    if out_path.exists() and not args.overwrite:
        msg = f"{out_path} exists (use --overwrite)"
        return f"{path}: error: {msg}", msg
    try:
        result = process_bytes(raw, args.detector, threshold=args.threshold,
                               dilation=args.dilation, ext_name=args.ext_name)
    except TinysegError as exc:
        return f"{path}: error: {exc}", str(exc)
    out_path.write_bytes(result.fits_bytes)
    masked = int(result.mask.sum())
    return f"{path}: {len(result.objects)} objects, {masked} masked pixels", None


def cmd_detect(args) -> int:
    out_dir = Path(args.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".tinyseg-write-probe"
        probe.touch()
        probe.unlink()
    except OSError as exc:
        print(f"error: output dir {out_dir} not writable: {exc}", file=sys.stderr)
        return 2

    inputs = _expand_inputs(args.inputs)
    failures = 0
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(lambda p: _process_one(p, args), inputs))
    for line, error in results:
        if error is None:
            print(line)
        else:
            failures += 1
            print(line, file=sys.stderr)
    return 1 if failures else 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig.from_env()
    if args.port is not None:
        config.port = args.port
    if args.detector:
        config.detector = args.detector
    if args.static:
        config.static_dir = Path(args.static)

    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        sock.bind((args.host, config.port))
    except OSError as exc:
        print(f"error: cannot bind {args.host}:{config.port}: {exc}", file=sys.stderr)
        sock.close()
        return 1
    host, port = sock.getsockname()[:2]
    print(f"tinyseg serving on http://{host}:{port}", flush=True)

    app = create_app(config)
    server = uvicorn.Server(uvicorn.Config(app, log_level="info"))
    server.run(sockets=[sock])
    return 0


def cmd_golden(args) -> int:
    cases = goldenmod.generate_suite(args.output_dir, seed=args.seed)
    print(f"wrote {len(cases)} golden cases to {args.output_dir}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "detect":
        return cmd_detect(args)
    if args.command == "serve":
        return cmd_serve(args)
    return cmd_golden(args)


if __name__ == "__main__":
    sys.exit(main())
