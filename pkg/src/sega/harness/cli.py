"""Command line: ``sega run``, ``sega plot`` and ``sega verify``.

Exit codes: 0 success, 2 configuration or input error, 3 invariant failure.
"""
from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from sega.harness.config import ConfigError, load_config
from sega.harness.plot import X_AXES, PlotError, emit_plot

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="sega", description="Sketched gradient experiments.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    r = sub.add_parser("run", help="run the experiment described by a TOML config")
    r.add_argument("config")
    r.add_argument("--seed", type=int, help="replace run.seeds by this single seed")
    r.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="set a config field, e.g. run.K=500 or method.sega.stepsize.alpha=0.1")
    r.add_argument("--quiet", action="store_true")
    p = sub.add_parser("plot", help="plot trace CSVs into one SVG")
    p.add_argument("csv", nargs="*")
    p.add_argument("--x", choices=sorted(X_AXES), default="iter")
    p.add_argument("--y", default="f_gap")
    p.add_argument("--out", required=True)
    p.add_argument("--title", default="")
    v = sub.add_parser("verify", help="run the invariant suites")
    v.add_argument("--seed", type=int, default=0)
    return ap


def _run(args) -> int:
    from sega.harness.experiments import run_experiment

    cfg = load_config(args.config, args.override, args.seed)
    results = run_experiment(cfg)
    if not args.quiet:
        for res in results:
            print(f"{res.method} seed={res.seed} f_gap={res.trace.last('f_gap'):.3e} -> {res.path}")
    return EXIT_OK


def _verify(args) -> int:
    from sega.verify import run_checks

    results = run_checks(args.seed)
    for res in results:
        print(f"{'PASS' if res.ok else 'FAIL'}  {res.name}: {res.detail}")
    return EXIT_OK if all(r.ok for r in results) else EXIT_INVARIANT


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run(args)
        if args.command == "plot":
            labels = emit_plot(args.csv, args.out, x=args.x, y=args.y, title=args.title)
            print(f"wrote {args.out} ({', '.join(labels)})")
            return EXIT_OK
        return _verify(args)
    except (ConfigError, PlotError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # solver-side validation, e.g. an infeasible stepsize for this problem
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
