#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Command-line front end of the LDLR/SDA toolkit.

    python run_project.py verify identities --seed 7
    python run_project.py sweep --spec specs/tensor_pca_sweep.json --jobs 4
    python run_project.py clone-test --m 2 3 4 --gamma 0.3
    python run_project.py sq-sim --problem specs/sparse_parity.json --oracle-m 50 --adversary toward_null

Exit codes: 0 pass, 1 verification failure, 2 usage error, 3 sweep infeasible at every point.
"""

import argparse
import json
import os
import sys
from typing import List, Optional

from src.measures.problem_io import load_sweep_spec
from src.utils.errors import LdlrSdaError, SpecFormatError, UnknownSuiteError
from src.utils.logger import DEFAULT_CONFIG_PATH, Logger

EXIT_PASS = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3

SUITE_CHOICES = ("identities", "inequalities", "noise", "cloning", "sq", "zoo", "all")

logger = Logger().get_logger()

# terminal colour codes
COLORS = {
    "HEADER": "\033[95m",
    "BLUE": "\033[94m",
    "GREEN": "\033[92m",
    "YELLOW": "\033[93m",
    "RED": "\033[91m",
    "ENDC": "\033[0m",
    "BOLD": "\033[1m",
    "UNDERLINE": "\033[4m"
}


def print_colored(text: str, color: str = "BLUE", bold: bool = False) -> None:
    """
    Print coloured text to the terminal (plain text when stdout is not a terminal)
    """
    if not sys.stdout.isatty():
        print(text)
        return
    color_code = COLORS.get(color, COLORS["BLUE"])
    bold_code = COLORS["BOLD"] if bold else ""
    print(f"{color_code}{bold_code}{text}{COLORS['ENDC']}")


def print_section(title: str) -> None:
    print("\n" + "=" * 80)
    print_colored(f" {title} ", "HEADER", bold=True)
    print("=" * 80)


def print_step(step: str) -> None:
    print_colored(f"\n>> {step}", "GREEN")


def check_environment(config_path: str) -> bool:
    """
    Check that the numerical stack is importable; a missing config file only falls back to defaults
    """
    print_step("Checking environment...")
    print(f"Python version: {sys.version.split()[0]}")
    if not os.path.exists(config_path):
        print_colored(f"Warning: config file {config_path} not found, using built-in defaults", "YELLOW")
    try:
        import networkx  # noqa: F401
        import numpy  # noqa: F401
        import pandas  # noqa: F401
        import scipy  # noqa: F401
        import tqdm  # noqa: F401
    except ImportError as e:
        print_colored(f"Error: missing dependency - {e}", "RED")
        print("Run: pip install -r requirements.txt")
        return False
    return True


def _pipeline(args):
    from main_driver import VerificationPipeline
    return VerificationPipeline(config_path=args.config, seed=args.seed, out_dir=args.out_dir,
                                jobs=getattr(args, "jobs", 1), cap_states=args.cap_states, quiet=args.quiet)


def run_verify(args) -> int:
    print_section(f"Verification suite: {args.suite}")
    pipeline = _pipeline(args)
    outcome = pipeline.verify(args.suite, args.out)
    for result in outcome["results"]:
        color = "GREEN" if result.passed else "RED"
        print_colored(f"{result.suite}: {len(result.reports) - len(result.failures)}/{len(result.reports)} passed",
                      color, bold=not result.passed)
        for failure in result.failures:
            print_colored(f"  FAILED {failure.name} {failure.values.get('problem_id', '')} "
                          f"{failure.error or ''}", "RED")
    print(f"Report: {outcome['csv']}")
    print(f"Manifest: {outcome['manifest']}")
    return EXIT_PASS if outcome["passed"] else EXIT_FAILURE


def run_sweep(args) -> int:
    print_section("Parameter sweep")
    spec = load_sweep_spec(args.spec)
    pipeline = _pipeline(args)
    print_step(f"Evaluating {len(list(spec.points()))} grid points with {pipeline.jobs} worker(s)...")
    outcome = pipeline.sweep(spec, args.out)
    print(f"Wrote {outcome['rows']} rows ({outcome['feasible']} feasible) to {outcome['csv']}")
    if outcome["infeasible_everywhere"]:
        print_colored("No grid point was feasible", "RED", bold=True)
        return EXIT_INFEASIBLE
    return EXIT_PASS


def run_clone_test(args) -> int:
    print_section("Cloning tests")
    pipeline = _pipeline(args)
    outcome = pipeline.clone_test(args.m, args.gamma, args.trials, args.mu, args.out)
    for report in outcome["reports"]:
        print_colored(f"{report.name} m={report.values.get('m', '')}: {'pass' if report else 'FAIL'}",
                      "GREEN" if report else "RED")
    print(f"Report: {outcome['csv']}")
    return EXIT_PASS if outcome["passed"] else EXIT_FAILURE


def run_sq_sim(args) -> int:
    print_section("SQ simulation")
    policy = args.policy
    if policy.lstrip().startswith("{"):
        try:
            policy = json.loads(policy)
        except json.JSONDecodeError as e:
            raise SpecFormatError(f"--policy is neither a policy name nor a JSON record: {e}") from e
    pipeline = _pipeline(args)
    outcome = pipeline.sq_sim(args.problem, args.oracle_m, args.adversary, policy, args.trials, args.out,
                              args.dump_transcripts)
    report = outcome["report"]
    print(f"type I rate {report.type_one_rate:.4f}, type II rate {report.type_two_rate:.4f}, "
          f"success {report.success_rate:.4f}")
    print(f"Report: {outcome['csv']}")
    return EXIT_PASS


def parse_arguments(argv: Optional[List[str]] = None):
    parser = argparse.ArgumentParser(description="LDLR / statistical-dimension verification toolkit")

    subparsers = parser.add_subparsers(dest="command", help="command to run")

    # shared flags
    parent_parser = argparse.ArgumentParser(add_help=False)
    parent_parser.add_argument("--config", default=DEFAULT_CONFIG_PATH, help="configuration file")
    parent_parser.add_argument("--seed", type=int, default=None, help="root seed (default from config)")
    parent_parser.add_argument("--out", default=None, help="CSV output path")
    parent_parser.add_argument("--out-dir", default=None, help="output directory for default file names")
    parent_parser.add_argument("--cap-states", type=int, default=None, help="override numerics.state_cap")
    parent_parser.add_argument("--quiet", action="store_true", help="warnings only, no progress bars")

    verify_parser = subparsers.add_parser("verify", parents=[parent_parser], help="run a verification suite")
    verify_parser.add_argument("suite", help=f"one of {', '.join(SUITE_CHOICES)}")

    sweep_parser = subparsers.add_parser("sweep", parents=[parent_parser], help="evaluate a parameter grid")
    sweep_parser.add_argument("--spec", required=True, help="sweep specification file")
    sweep_parser.add_argument("--jobs", type=int, default=1, help="worker processes")

    clone_parser = subparsers.add_parser("clone-test", parents=[parent_parser], help="validate the cloners")
    clone_parser.add_argument("--m", type=int, nargs="+", default=[2, 3, 4], help="clone counts")
    clone_parser.add_argument("--gamma", type=float, default=0.3, help="Bernoulli base density")
    clone_parser.add_argument("--mu", type=float, default=0.0, help="Gaussian input mean")
    clone_parser.add_argument("--trials", type=int, default=None, help="Monte-Carlo trials")

    sq_parser = subparsers.add_parser("sq-sim", parents=[parent_parser], help="simulate an SQ algorithm")
    sq_parser.add_argument("--problem", required=True, help="problem specification file")
    sq_parser.add_argument("--oracle-m", type=float, required=True, help="VSTAT parameter")
    sq_parser.add_argument("--adversary", default="honest", help="honest, toward_null or uniform_noise")
    sq_parser.add_argument("--policy", default="parity_scan", help="policy name or JSON record")
    sq_parser.add_argument("--trials", type=int, default=None, help="seeded trials")
    sq_parser.add_argument("--dump-transcripts", action="store_true", help="write every oracle exchange")

    return parser.parse_args(argv)


COMMANDS = {"verify": run_verify, "sweep": run_sweep, "clone-test": run_clone_test, "sq-sim": run_sq_sim}


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_arguments(argv)
    if not args.command:
        print("Please give a command; see --help.")
        return EXIT_USAGE
    if args.command == "verify" and args.suite not in SUITE_CHOICES:
        print_colored(f"Unknown suite {args.suite!r}; choose one of {', '.join(SUITE_CHOICES)}", "RED")
        return EXIT_USAGE
    if not check_environment(args.config):
        print_colored("Environment check failed", "RED")
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (UnknownSuiteError, SpecFormatError) as e:
        print_colored(f"Usage error: {e}", "RED")
        return EXIT_USAGE
    except LdlrSdaError as e:
        logger.error(f"{args.command} failed: {type(e).__name__}: {e}")
        print_colored(f"Error: {type(e).__name__}: {e}", "RED")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
