"""Command line interface: run experiment configs and inspect scenarios."""

from __future__ import annotations

import argparse
import sys

import yaml

from . import runner, scenarios
from .errors import ConfigError, GaussDomainError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaussdomain",
        description="Diagnose Gaussian limits of iid sums and Levy marginals "
                    "from declarative experiment configs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a YAML experiment config")
    p_run.add_argument("config", help="path to the config file")
    p_run.add_argument("--out", default="gaussdomain-results",
                       help="output directory (default: %(default)s)")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    p_run.add_argument("--jobs", type=int, default=1,
                       help="scenarios to run in parallel (default: 1)")

    sub.add_parser("list-scenarios", help="list the built-in scenarios")

    p_desc = sub.add_parser(
        "describe", help="print a runnable config for a built-in scenario")
    p_desc.add_argument("scenario", help="built-in scenario name")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return runner.run(args.config, args.out,
                              seed_override=args.seed, jobs=args.jobs)
        if args.command == "list-scenarios":
            for name, desc in scenarios.list_scenarios():
                print(f"{name}: {desc}")
            return 0
        if args.command == "describe":
            cfg = {"seed": 20260809,
                   "scenarios": [scenarios.builtin_config(args.scenario)]}
            print(yaml.safe_dump(cfg, sort_keys=False, width=78))
            return 0
    except ConfigError as exc:
        print(f"config-invalid: {exc}", file=sys.stderr)
        return 2
    except GaussDomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
