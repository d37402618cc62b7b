"""Figure rendering CLI.

    dml-figs render --kind moa_curve --in run/moa.csv --out moa.png
    dml-figs render --kind maze_policy --in run/oracle_policy_phase0.csv \
        run/maze_phase0.json --out policy.png

Exit codes: 2 for unknown kinds or schema mismatches, 3 for I/O errors.
"""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, FigureSpec, SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dml-figs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure from CSV inputs")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--in", dest="inputs", required=True, nargs="+",
                   metavar="FILE", help="input CSV/JSON files")
    p.add_argument("--out", required=True, metavar="IMAGE")

    args = parser.parse_args(argv)
    try:
        render(FigureSpec(args.kind, tuple(args.inputs), args.out))
        print(args.out)
    except SchemaError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
