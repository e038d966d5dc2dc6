"""Command-line entry: one figure per invocation.

    plotview INPUT.csv --kind phase --out figure.png [--equilibria eq.csv]

Exits 0 on success, 1 on schema/content errors, 2 on usage errors,
5 on file I/O problems.
"""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, PlotJob, RenderError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotview",
        description="Render fairdyn CSV artifacts (phase, trajectory, basin) to images.",
    )
    parser.add_argument("input", help="CSV artifact to render")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--equilibria", help="equilibria CSV overlay (circles)")
    parser.add_argument("--xlim", help="x axis limits as 'min,max'")
    parser.add_argument("--ylim", help="y axis limits as 'min,max'")
    parser.add_argument("--arrow-scale", type=float, default=0.5,
                        help="phase arrow length factor (default 0.5)")
    return parser


def _parse_limits(xlim: str | None, ylim: str | None):
    if xlim is None and ylim is None:
        return None
    if xlim is None or ylim is None:
        raise RenderError("provide both --xlim and --ylim or neither")
    try:
        x0, x1 = (float(v) for v in xlim.split(","))
        y0, y1 = (float(v) for v in ylim.split(","))
    except ValueError as exc:
        raise RenderError(f"bad axis limits: {exc}") from exc
    return (x0, x1, y0, y1)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        job = PlotJob(
            input_path=args.input,
            kind=args.kind,
            out_path=args.out,
            equilibria_path=args.equilibria,
            axis_limits=_parse_limits(args.xlim, args.ylim),
            arrow_scale=args.arrow_scale,
        )
        result = render(job)
    except RenderError as exc:
        print(f"plotview: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"plotview: i/o error: {exc}", file=sys.stderr)
        return 5
    print(f"{result.out_path}: {result.kind}, {result.drawn} of {result.rows} rows drawn, "
          f"{len(result.circles)} circles")
    return 0


if __name__ == "__main__":
    sys.exit(main())
