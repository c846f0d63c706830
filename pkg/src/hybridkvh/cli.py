"""Command-line entry point.

    hybridkvh run --config FILE --out DIR      run a scenario file
    hybridkvh run --scenario NAME --out DIR    run a built-in scenario
    hybridkvh check --suite NAME               run an invariant suite
    hybridkvh scenarios                        list built-in scenarios

Exit codes: 0 success, 1 validation/usage error, 2 runtime failure,
3 check-suite failure.  HYBRIDKVH_THREADS caps FFT workers (0 = auto).
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import ConfigError, parse_config
from .grid import GridError, set_num_threads
from .model import ModelError
from .scenarios import list_scenarios, run_scenario, scenario_config
from .suites import SuiteError, run_suite

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_CHECK_FAILED = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_VALIDATION)


def _build_parser() -> _Parser:
    p = _Parser(prog="hybridkvh",
                description="mixed quantum-classical wave dynamics on periodic grids")
    sub = p.add_subparsers(dest="verb")
    run = sub.add_parser("run", help="run a scenario")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="path to a scenario configuration file")
    src.add_argument("--scenario", help="name of a built-in scenario")
    run.add_argument("--out", required=True, help="output directory")
    check = sub.add_parser("check", help="run an invariant suite")
    check.add_argument("--suite", required=True,
                       help="one of: identities, convergence, closure")
    sub.add_parser("scenarios", help="list built-in scenarios")
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    threads = os.environ.get("HYBRIDKVH_THREADS")
    if threads is not None:
        try:
            set_num_threads(int(threads))
        except ValueError:
            sys.stderr.write(f"error: HYBRIDKVH_THREADS={threads!r} is not an integer\n")
            return EXIT_VALIDATION
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.verb == "scenarios":
        for name, desc in list_scenarios():
            print(f"{name:22s} {desc}")
        return EXIT_OK

    if args.verb == "check":
        try:
            report = run_suite(args.suite)
        except SuiteError as exc:
            sys.stderr.write(f"error: {exc}\n")
            return EXIT_VALIDATION
        failed = 0
        for entry in report:
            status = "PASS" if entry["passed"] else "FAIL"
            failed += not entry["passed"]
            print(f"{status}  {entry['name']:42s} value={entry['value']:.6e} "
                  f"tol={entry['tolerance']:.2e}")
        print(f"{len(report) - failed}/{len(report)} checks passed")
        return EXIT_OK if failed == 0 else EXIT_CHECK_FAILED

    if args.verb == "run":
        try:
            if args.scenario:
                cfg = scenario_config(args.scenario)
            else:
                try:
                    text = open(args.config).read()
                except OSError as exc:
                    sys.stderr.write(f"error: cannot read config: {exc}\n")
                    return EXIT_VALIDATION
                cfg = parse_config(text)
        except ConfigError as exc:
            sys.stderr.write(f"error: {exc}\n")
            return EXIT_VALIDATION
        try:
            summary = run_scenario(cfg, args.out)
        except (ConfigError, GridError, ModelError, ValueError) as exc:
            sys.stderr.write(f"error: {exc}\n")
            return EXIT_VALIDATION if isinstance(exc, ConfigError) else EXIT_RUNTIME
        except Exception as exc:  # propagation/io failures, partial artifacts flushed
            sys.stderr.write(f"runtime failure: {exc}\n")
            return EXIT_RUNTIME
        final = summary.get("final", {})
        t = final.get("t")
        print(f"run complete: kind={summary['kind']} rows={summary.get('rows')} "
              f"t_final={t}")
        return EXIT_OK

    parser.print_help()
    return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
