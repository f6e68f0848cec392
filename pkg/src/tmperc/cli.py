"""Command-line entry point.

Subcommands:
  analytic   print the critical seed size, bottleneck generation and
             assumption report for every sweep point of a config
  dichotomy  sweep simulations around the analytic critical seed size
  intervene  trigger interventions mid-run and compare prediction to outcome
  validate   run the built-in property battery
"""

from __future__ import annotations

import argparse
import json
import sys

from . import checks, harness

__all__ = ["main"]


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-c", "--config", required=True, help="path to a JSON config")
    parser.add_argument("--seed", type=int, default=None, help="override the master seed")
    parser.add_argument("--out", default=None, help="output path base (overrides config)")
    parser.add_argument("--jobs", type=int, default=1, help="parallel worker processes")


def _load(args: argparse.Namespace) -> harness.ExperimentConfig:
    config = harness.load_config(args.config)
    if args.seed is not None:
        raw = dict(config.raw)
        raw["master_seed"] = args.seed
        config = harness.ExperimentConfig(raw)
    return config


def _emit(table: harness.ResultTable, config: harness.ExperimentConfig, args) -> None:
    base = args.out or config.output or f"out/{config.name}"
    for path in harness.emit(table, base):
        print(f"wrote {path}")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="tmperc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_analytic = sub.add_parser("analytic", help="print critical seed sizes")
    _add_common(p_analytic)

    p_dichotomy = sub.add_parser("dichotomy", help="run a dichotomy sweep")
    _add_common(p_dichotomy)

    p_intervene = sub.add_parser("intervene", help="run an intervention sweep")
    _add_common(p_intervene)

    p_validate = sub.add_parser("validate", help="run the property battery")
    p_validate.add_argument("--quick", action="store_true", help="smaller draw counts")

    args = parser.parse_args(argv)

    if args.command == "validate":
        failures = 0
        for name, ok, detail in checks.run_validation(quick=args.quick):
            print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
            failures += 0 if ok else 1
        return 1 if failures else 0

    config = _load(args)
    if args.command == "analytic":
        for row in harness.analytic_summary(config):
            print(json.dumps(row))
        return 0
    if args.command == "dichotomy":
        table = harness.run_dichotomy(config, jobs=args.jobs)
        _emit(table, config, args)
        return 0
    if args.command == "intervene":
        table = harness.run_intervention(config, jobs=args.jobs)
        _emit(table, config, args)
        return 0
    parser.error(f"unknown command {args.command!r}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
