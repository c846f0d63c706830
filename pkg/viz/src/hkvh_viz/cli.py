"""Plot verbs over solver artifacts:

    hkvh-plot series   diagnostics.csv -c norm,energy_re -o out.png
    hkvh-plot drift    diagnostics.csv -c norm,energy_re -o out.png
    hkvh-plot heatmap  rho_c_002000.hkvh -o out.png [--slice K]
    hkvh-plot loops    loops.csv -o out.png

Exit codes: 0 success, 1 bad arguments or malformed input files.
"""

from __future__ import annotations

import argparse
import sys

from .formats import FormatError
from .plots import plot_drift, plot_heatmap, plot_loops, plot_series


def _build_parser():
    p = argparse.ArgumentParser(prog="hkvh-plot",
                                description="plot hybridkvh run artifacts")
    sub = p.add_subparsers(dest="kind", required=True)

    series = sub.add_parser("series", help="diagnostics columns against time")
    series.add_argument("csv")
    series.add_argument("-c", "--columns", default="norm",
                        help="comma-separated column names")
    series.add_argument("-o", "--out", required=True)
    series.add_argument("--log", action="store_true")

    drift = sub.add_parser("drift", help="absolute drift of columns, log scale")
    drift.add_argument("csv")
    drift.add_argument("-c", "--columns", default="norm,energy_re")
    drift.add_argument("-o", "--out", required=True)

    heat = sub.add_parser("heatmap", help="phase-space heatmap of a snapshot")
    heat.add_argument("snapshot")
    heat.add_argument("-o", "--out", required=True)
    heat.add_argument("--slice", type=int, default=0,
                      help="quantum index for rank-3 snapshots")
    heat.add_argument("--real", action="store_true",
                      help="draw the real part instead of the magnitude squared")

    loops = sub.add_parser("loops", help="circulation-loop diagnostics")
    loops.add_argument("csv")
    loops.add_argument("-o", "--out", required=True)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        if args.kind == "series":
            out = plot_series(args.csv, args.columns.split(","), args.out,
                              logscale=args.log)
        elif args.kind == "drift":
            out = plot_drift(args.csv, args.columns.split(","), args.out)
        elif args.kind == "heatmap":
            out = plot_heatmap(args.snapshot, args.out, slice_index=args.slice,
                               magnitude=not args.real)
        else:
            out = plot_loops(args.csv, args.out)
    except FormatError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
