"""fruitmarket-plot: turn run artifacts into figures plus data tables."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .data import SchemaError
from .render import FIGURE_KINDS, FigureSpec, render


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="fruitmarket-plot")
    p.add_argument("kind", choices=FIGURE_KINDS)
    p.add_argument("inputs", nargs="+", type=Path,
                   help="episodes.csv, sweep.csv, or event .jsonl files")
    p.add_argument("--out", type=Path, default=Path("."))
    p.add_argument("--name", default=None)
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--columns", nargs="*", default=[])
    p.add_argument("--x-column", default="avg_agent_steps")
    p.add_argument("--sd-x", default="apples_produced",
                   help="supply-demand x axis column")
    p.add_argument("--format", default="svg", choices=("svg", "png"))
    args = p.parse_args(argv)
    spec = FigureSpec(
        kind=args.kind, inputs=list(args.inputs), out_dir=args.out,
        name=args.name, bins=args.bins, columns=list(args.columns),
        x_column=args.x_column, sd_x=args.sd_x, image_format=args.format,
    )
    try:
        result = render(spec)
    except SchemaError as err:
        print(f"input error: {err}", file=sys.stderr)
        return 1
    print(result.table_path)
    print(result.image_path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
