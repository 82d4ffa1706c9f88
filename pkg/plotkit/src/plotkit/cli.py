"""Figure rendering CLI.

    atomwalk-plot <figure-kind> --in FILES --out IMAGE

Figure kinds: phase-plane, bloch-series, fractal-panels, pdf-semilog,
pdf-loglog, ftle-heatmap.  Inputs are the simulator's CSV/JSON data files in
their documented schemas.
"""
from __future__ import annotations

import argparse
import json
import sys

from .figures import FigureKind, FigureSpec, render
from .readers import SchemaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="atomwalk-plot", description=__doc__)
    parser.add_argument("kind", choices=[k.value for k in FigureKind])
    parser.add_argument(
        "--in",
        dest="inputs",
        nargs="+",
        required=True,
        help="input data files (CSV, plus fit/zoom JSON where applicable)",
    )
    parser.add_argument("--out", required=True, help="output image path (.png, .svg, .pdf)")
    parser.add_argument("--title", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = FigureSpec(
            kind=FigureKind(args.kind), inputs=args.inputs, output=args.out, title=args.title
        )
        render(spec)
    except SchemaError as exc:
        json.dump({"error": "SchemaError", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    print(args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
