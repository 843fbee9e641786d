"""Command line entry point: run, converge, list-scenarios."""

from __future__ import annotations

import argparse
import sys
import warnings

from .errors import ConfigError, ScenarioError
from .runner import convergence_study, run_scenario
from .scenario import bundled_scenarios, resolve_scenario

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="madelung-gauge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="run a scenario file or bundled scenario")
    run.add_argument("config")
    run.add_argument("--out", help="directory for CSV fields and report.txt")
    run.add_argument("--seed", type=int, help="seed for the trajectory ensemble check")
    conv = sub.add_parser("converge", help="refinement study of a scenario")
    conv.add_argument("config")
    conv.add_argument("--levels", type=int, default=3)
    conv.add_argument("--out", help="directory for convergence.txt")
    conv.add_argument("--seed", type=int, help="accepted for symmetry with run; unused")
    sub.add_parser("list-scenarios", help="print the bundled scenario names")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-scenarios":
        for name in bundled_scenarios():
            print(name)
        return EXIT_PASS
    try:
        scenario = resolve_scenario(args.config)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            if args.command == "run":
                report = run_scenario(scenario, args.out, args.seed)
                print(report.to_text(), end="")
                return EXIT_PASS if report.passed else EXIT_FAIL
            if args.levels < 2:
                print("error: --levels must be at least 2", file=sys.stderr)
                return EXIT_USAGE
            table = convergence_study(scenario, args.levels)
            text = "\n".join(table.lines()) + "\n"
            print(text, end="")
            if args.out:
                from pathlib import Path
                Path(args.out).mkdir(parents=True, exist_ok=True)
                (Path(args.out) / "convergence.txt").write_text(text)
            return EXIT_PASS
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
