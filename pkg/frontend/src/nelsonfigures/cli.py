"""Command-line entry point for render_figures.

Usage:
    render_figures <csv...> --kind <sweep-loglog|identity-residual|observables>
                   --out <image path> [--ref-slope 0.5]

Exit codes: 0 figure written, 2 usage, schema, or data errors.
"""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, FigureSpec, SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render_figures",
        description="Render figures from nelson-lab CSV experiment outputs")
    parser.add_argument("csv", nargs="+", help="input CSV file(s)")
    parser.add_argument("--kind", required=True, choices=KINDS,
                        help="figure kind")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--ref-slope", type=float, default=0.5,
                        help="reference guide-line slope (sweep-loglog)")
    args = parser.parse_args(argv)

    try:
        spec = FigureSpec(inputs=args.csv, output=args.out, kind=args.kind,
                          ref_slope=args.ref_slope)
        info = render(spec)
    except (SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if "slope_wv" in info:
        print(f"fitted slopes: coherent frame {info['slope_wv']:.4f}, "
              f"dressed frame {info['slope_zv']:.4f}")
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
