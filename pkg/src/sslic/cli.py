"""Command-line interface.

Exit status: 0 success, 1 usage error, 2 I/O error, 3 algorithm precondition failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import io as vio
from .bench import run_scaling_study
from .color import convert_image_to_lab
from .connectivity import label_count
from .contour import mask_label_contour
from .core import PreconditionError, SlicParams
from .parallel import THREADS_ENV, default_workers
from .pipeline import segment

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_ALGO = 0, 1, 2, 3
DEFAULT_GRID = 50


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return values


def _positive_int(text: str) -> int:
    values = _int_list(text)
    if len(values) != 1:
        raise argparse.ArgumentTypeError(f"expected a single positive integer, got {text!r}")
    return values[0]


def _add_slic_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid", type=_int_list, help="supergrid size per axis, e.g. 50,50 (default 50, capped at the extent)")
    p.add_argument("--weight", type=float, default=10.0, help="spatial weight m (default 10)")
    p.add_argument("--iters", type=_positive_int, help="iterations (default 10 for 2D, 5 for 3D+)")
    p.add_argument("--lab-convert", action="store_true", help="convert 8-bit sRGB input to CIE-Lab first")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sslic", description="Scalable n-dimensional SLIC superpixels")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    seg = sub.add_parser("segment", help="compute a superpixel label map")
    seg.add_argument("--in", dest="input", required=True)
    seg.add_argument("--out", required=True, help="label header path (uint32 raw payload)")
    _add_slic_options(seg)
    seg.add_argument("--threads", type=_positive_int, help=f"worker count (default ${THREADS_ENV} or all cores)")
    seg.add_argument("--no-connectivity", action="store_true")
    seg.add_argument("--residuals", help="write the per-iteration residuals here")

    con = sub.add_parser("contour", help="black out superpixel boundaries on an image")
    con.add_argument("--in", dest="input", required=True)
    con.add_argument("--labels", required=True)
    con.add_argument("--out", required=True, help=".png for 2D 8-bit images, otherwise a raw volume")

    ben = sub.add_parser("bench", help="strong-scaling study over thread counts")
    ben.add_argument("--in", dest="input", required=True)
    ben.add_argument("--threads", type=_int_list, required=True, help="e.g. 1,2,4,8")
    ben.add_argument("--reps", type=_positive_int, default=5)
    ben.add_argument("--split-connectivity", action="store_true", help="time with and without connectivity")
    ben.add_argument("--report", required=True, help="CSV output; a Markdown table is written next to it")
    _add_slic_options(ben)
    return parser


def _load(path: str, lab: bool):
    img = vio.read_volume(path)
    return convert_image_to_lab(img) if lab else img


def _params(args, img, connectivity: bool) -> SlicParams:
    grid = args.grid or [min(DEFAULT_GRID, d) for d in img.dims]
    return SlicParams(tuple(grid), args.weight, args.iters, connectivity)


def _workers(args) -> int:
    if args.threads is not None:
        return args.threads
    try:
        return default_workers()
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_segment(args) -> int:
    img = _load(args.input, args.lab_convert)
    params = _params(args, img, not args.no_connectivity)
    result = segment(img, params, _workers(args))
    vio.write_labels(result.labels, args.out)
    if args.residuals:
        Path(args.residuals).write_text("".join(f"{r!r}\n" for r in result.residuals))
    print(
        f"{label_count(result.labels)} superpixels, {len(result.residuals)} iterations -> {args.out}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_contour(args) -> int:
    img = vio.read_volume(args.input)
    labels = vio.read_labels(args.labels)
    out = mask_label_contour(img, labels)
    vio.write_volume(out, args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    if 1 not in args.threads:
        raise UsageError("--threads must include 1 (the speedup baseline)")
    img = _load(args.input, args.lab_convert)
    params = _params(args, img, connectivity=False)
    report = run_scaling_study(img, params, args.threads, args.reps, measure_connectivity=args.split_connectivity)
    report_path = Path(args.report)
    report_path.write_text(report.to_csv())
    md = report.to_markdown()
    md_path = report_path.with_suffix(".md")
    if md_path == report_path:
        md_path = report_path.with_name(report_path.name + ".md")
    md_path.write_text(md)
    print(md, file=sys.stderr)
    return EXIT_OK


COMMANDS = {"segment": cmd_segment, "contour": cmd_contour, "bench": cmd_bench}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (vio.VolumeIOError, OSError) as exc:
        print(f"sslic: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PreconditionError, ValueError) as exc:
        print(f"sslic: {exc}", file=sys.stderr)
        return EXIT_ALGO


def main() -> None:
    sys.exit(cli_main())
