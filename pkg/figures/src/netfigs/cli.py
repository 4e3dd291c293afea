"""One console script per figure kind; flags mirror FigureSpec fields."""

from __future__ import annotations

import argparse
import sys

from .io import SchemaError
from .render import FigureSpec, render


def _parser(kind, n_inputs_help):
    parser = argparse.ArgumentParser(description=f"Render a {kind} figure.")
    parser.add_argument("inputs", nargs="+", help=n_inputs_help)
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--title", default="")
    parser.add_argument("--xlabel", default="")
    parser.add_argument("--ylabel", default="")
    parser.add_argument("--logx", action="store_true", default=None)
    parser.add_argument("--logy", action="store_true", default=None)
    return parser


def _run(kind, n_inputs_help, argv, extra_flags=None):
    parser = _parser(kind, n_inputs_help)
    if extra_flags:
        extra_flags(parser)
    args = parser.parse_args(argv)
    extra = {}
    if getattr(args, "threshold", None):
        extra["thresholds"] = args.threshold
    spec = FigureSpec(
        kind=kind,
        inputs=args.inputs,
        output=args.out,
        title=args.title,
        xlabel=args.xlabel,
        ylabel=args.ylabel,
        logx=args.logx,
        logy=args.logy,
        extra=extra,
    )
    try:
        path = render(spec)
    except (SchemaError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


def main_profile(argv=None):
    return _run("profile", "field CSV file(s) (branch,mode,x,value)", argv)


def main_convergence(argv=None):
    return _run(
        "convergence",
        "study CSV (epsilon,sup_error,junction_gap), optional study JSON",
        argv,
    )


def main_gap(argv=None):
    return _run("gap", "study CSV (epsilon,sup_error,junction_gap)", argv)


def main_trajectory(argv=None):
    def extra(parser):
        parser.add_argument(
            "--threshold",
            type=float,
            action="append",
            help="draw horizontal relay threshold lines at +/- this value",
        )

    return _run(
        "trajectory",
        "trajectory CSV (t,x,mode,control,running_cost,switch)",
        argv,
        extra_flags=extra,
    )


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main_profile())
