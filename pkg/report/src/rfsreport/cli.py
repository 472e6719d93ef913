"""Command line entry point: report --in <dir> --figures ... --out <dir>."""

from __future__ import annotations

import argparse
import os

from .figures import FIGURES, ReportSpec, render_report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="report", description=__doc__)
    parser.add_argument(
        "--in", dest="in_dir", required=True,
        help="directory holding per_step.csv and aggregate.csv",
    )
    parser.add_argument(
        "--figures", default=",".join(FIGURES),
        help=f"comma-separated subset of {','.join(FIGURES)}",
    )
    parser.add_argument("--out", required=True, help="output directory for images")
    parser.add_argument("--format", choices=("svg", "png"), default="svg")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = ReportSpec(
        per_step_csv=os.path.join(args.in_dir, "per_step.csv"),
        aggregate_csv=os.path.join(args.in_dir, "aggregate.csv"),
        out_dir=args.out,
        figures=tuple(f.strip() for f in args.figures.split(",") if f.strip()),
        image_format=args.format,
    )
    result = render_report(spec)
    for name, path in result.images.items():
        print(f"wrote {path}")
    print(f"wrote {result.summary_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
