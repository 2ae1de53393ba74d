"""Command-line figure rendering: one subcommand per figure kind."""

import argparse
import sys

from .readers import SchemaError


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lgfig", description="Render diagnostic figures from simulator artifacts"
    )
    sub = parser.add_subparsers(dest="kind", required=True)

    p_gap = sub.add_parser("gap-time", help="observable gap vs time from report.csv")
    p_gap.add_argument("report")
    p_gap.add_argument("--out", required=True)
    p_gap.add_argument("--logy", action="store_true")

    p_sc = sub.add_parser("scaling", help="log-log rate fit from sweep.csv")
    p_sc.add_argument("sweep")
    p_sc.add_argument("--out", required=True)
    p_sc.add_argument("--axis", choices=["hbar", "gamma"], default="hbar")
    p_sc.add_argument("--fits", default=None, help="fits.json with stored exponents")
    p_sc.add_argument("--refit", action="store_true", help="refit the slope locally")

    p_wp = sub.add_parser("wigner-panel", help="heatmap row from field containers")
    p_wp.add_argument("fields", nargs="+")
    p_wp.add_argument("--out", required=True)
    p_wp.add_argument("--labels", nargs="*", default=None)

    p_nts = sub.add_parser("nts-trace", help="squeezing-floor trace from nts_trace.csv")
    p_nts.add_argument("trace")
    p_nts.add_argument("--out", required=True)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    from . import render

    try:
        if args.kind == "gap-time":
            out = render.render_gap_time(args.report, args.out, logy=args.logy)
        elif args.kind == "scaling":
            out = render.render_scaling(
                args.sweep, args.out, axis=args.axis, fits_json=args.fits, refit=args.refit
            )
        elif args.kind == "wigner-panel":
            out = render.render_wigner_panel(args.fields, args.out, labels=args.labels)
        else:
            out = render.render_nts_trace(args.trace, args.out)
    except (SchemaError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
