"""Command-line figure renderer for benchmark and replay CSV directories."""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_KINDS, FigureSpec, render

import matplotlib.pyplot as plt


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plots",
        description="Render figures from benchmark/replay CSV artifacts.")
    parser.add_argument("kind", choices=FIGURE_KINDS,
                        help="which figure to render")
    parser.add_argument("--in", dest="in_dir", required=True,
                        help="artifact directory written by the batch tool")
    parser.add_argument("--out", dest="out_path", required=True,
                        help="output image file (format from extension)")
    parser.add_argument("--methods",
                        help="comma-separated method (or replay mode) filter")
    parser.add_argument("--trial", type=int, default=0,
                        help="trial index for path figures (default 0)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    methods = tuple(m for m in args.methods.split(",") if m) \
        if args.methods else None
    try:
        spec = FigureSpec(in_dir=args.in_dir, kind=args.kind,
                          out_path=args.out_path, methods=methods,
                          trial=args.trial)
        fig = render(spec)
        plt.close(fig)
    except (FileNotFoundError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
