"""
Command-line interface
"""

import argparse
import sys
from enum import StrEnum
from pathlib import Path
from typing import NoReturn

from .config import (
    DEFAULT_POPULATION_SIZE,
    DEFAULT_TAP_MAX_ITERS,
    DEFAULT_TAP_TOLERANCE,
)
from .errors import ExitCode
from .evolve import RunBudget
from .instgen import VariantName
from .output import OutputFormat as OutputFormat
from .plbe import EvaluatorKind, PruningVariant
from .surrogate import SurrogateKind


class Command(StrEnum):
    """Enumeration of subcommands."""

    TAP = "tap"
    GENERATE = "generate"
    OPTIMIZE = "optimize"
    METRICS = "metrics"
    PLOT = "plot"
    EXPERIMENT = "experiment"


class ArgumentParser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with code 1."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(ExitCode.USAGE, f"{self.prog}: error: {message}\n")


def budget_arg(text: str) -> str:
    """Validate a `--budget` value, keeping its text for the run config."""
    try:
        RunBudget.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e
    return text


def bits_arg(text: str) -> str:
    if not text or set(text) - {"0", "1"}:
        msg = f"{text!r} is not a bitstring"
        raise argparse.ArgumentTypeError(msg)
    return text


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e
    if value < 1:
        msg = f"{value} is not a positive integer"
        raise argparse.ArgumentTypeError(msg)
    return value


def _non_negative_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e
    if not value >= 0:
        msg = f"{value} is not a non-negative number"
        raise argparse.ArgumentTypeError(msg)
    return value


def _add_tap_settings(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--tol",
        type=float,
        default=DEFAULT_TAP_TOLERANCE,
        help=f"Frank-Wolfe relative gap tolerance (default: {DEFAULT_TAP_TOLERANCE})",
    )
    parser.add_argument(
        "--max-iters",
        type=_positive_int,
        default=DEFAULT_TAP_MAX_ITERS,
        help=f"Frank-Wolfe iteration cap (default: {DEFAULT_TAP_MAX_ITERS})",
    )


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--instance", type=Path, required=True, help="Instance JSON file"
    )
    parser.add_argument(
        "--budget",
        type=budget_arg,
        default="iters=50",
        help="Stopping rule: iters=N, seconds=S and/or sims=N (default: iters=50)",
    )
    parser.add_argument(
        "--population",
        type=_positive_int,
        default=DEFAULT_POPULATION_SIZE,
        help=f"Population size (default: {DEFAULT_POPULATION_SIZE})",
    )
    parser.add_argument(
        "--workers",
        type=_positive_int,
        default=1,
        help="Concurrent traffic simulations (default: 1, deterministic)",
    )
    _add_tap_settings(parser)


def create_argument_parser() -> argparse.ArgumentParser:
    """Create and configure argument parser."""
    parser = ArgumentParser(
        prog="renosched",
        description=(
            "Bi-objective road renovation scheduling: travel delay versus failure "
            "risk, with surrogate-assisted pruning of traffic simulations"
        ),
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  renosched tap --net SiouxFalls_net.tntp --trips SiouxFalls_trips.tntp
  renosched generate --net SiouxFalls_net.tntp --trips SiouxFalls_trips.tntp \\
      --seed 1 --variant tight --output instance.json
  renosched optimize --instance instance.json --evaluator plbe --variant ep \\
      --surrogate q05 --seed 1 --budget iters=100 --archive runs/ep-q05
  renosched metrics --archive runs/ep-q05 --format json
  renosched plot --archive runs/ep-q05

Log level is read from RENOSCHED_LOG (DEBUG, INFO, WARNING, ERROR).
Exit codes: 0 ok, 1 usage, 2 data error, 3 infeasible.
        """,
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    tap = subparsers.add_parser(
        Command.TAP, help="Solve the user equilibrium of a network"
    )
    tap.add_argument("--net", type=Path, required=True, help="TNTP network file")
    tap.add_argument("--trips", type=Path, required=True, help="TNTP trips file")
    tap.add_argument(
        "--scenario",
        type=bits_arg,
        help="Closed links as a bitstring with one character per link",
    )
    tap.add_argument(
        "--output",
        "-o",
        type=Path,
        help="CSV output path; a JSON summary is written next to it",
    )
    _add_tap_settings(tap)

    generate = subparsers.add_parser(
        Command.GENERATE, help="Generate a renovation scheduling instance"
    )
    generate.add_argument("--net", type=Path, required=True, help="TNTP network file")
    generate.add_argument("--trips", type=Path, required=True, help="TNTP trips file")
    generate.add_argument("--seed", type=int, default=0, help="Random seed")
    generate.add_argument(
        "--variant",
        type=VariantName,
        choices=list(VariantName),
        help="Sensitivity-analysis preset",
    )
    generate.add_argument(
        "--horizon", type=_positive_int, help="Number of periods (default: 80)"
    )
    generate.add_argument(
        "--demand-scale",
        type=_non_negative_float,
        default=1.0,
        help="Extra factor on the trips file demand (default: 1.0, verbatim)",
    )
    generate.add_argument(
        "--output",
        "-o",
        type=Path,
        default=Path("instance.json"),
        help="Instance output path (default: instance.json)",
    )

    optimize = subparsers.add_parser(
        Command.OPTIMIZE, help="Run NSGA-II and write a run archive"
    )
    _add_run_options(optimize)
    optimize.add_argument(
        "--evaluator",
        type=EvaluatorKind,
        choices=list(EvaluatorKind),
        default=EvaluatorKind.STANDARD.value,
        help="Offspring evaluator (default: standard)",
    )
    optimize.add_argument(
        "--variant",
        type=PruningVariant,
        choices=list(PruningVariant),
        default=PruningVariant.ELIMINATION.value,
        help="Pruning variant of the plbe evaluator (default: ep)",
    )
    optimize.add_argument(
        "--surrogate",
        type=SurrogateKind,
        choices=list(SurrogateKind),
        default=SurrogateKind.HEURISTIC.value,
        help="Surrogate of the plbe evaluator (default: heuristic)",
    )
    optimize.add_argument("--seed", type=int, default=0, help="Random seed")
    optimize.add_argument(
        "--archive", type=Path, required=True, help="Run archive directory"
    )
    optimize.add_argument(
        "--trace", action="store_true", help="Write per-evaluation trace.csv"
    )

    metrics = subparsers.add_parser(
        Command.METRICS, help="Recompute front metrics of run archives"
    )
    metrics.add_argument(
        "--archive", type=Path, nargs="+", required=True, help="Run archive(s)"
    )
    metrics.add_argument(
        "--format",
        type=OutputFormat,
        choices=list(OutputFormat),
        default=OutputFormat.TABLE.value,
        help="Output format (default: table)",
    )

    plot = subparsers.add_parser(Command.PLOT, help="Plot run histories as SVG")
    plot.add_argument(
        "--archive", type=Path, nargs="+", required=True, help="Run archive(s)"
    )
    plot.add_argument(
        "--output",
        "-o",
        type=Path,
        help="Plot directory (default: plots/ in the first archive)",
    )

    experiment = subparsers.add_parser(
        Command.EXPERIMENT,
        help="Run several algorithms over several seeds with shared bounds",
    )
    _add_run_options(experiment)
    experiment.add_argument(
        "--algorithms",
        default="S|-|-,EP|H|-,LE|H|-,EP|X|0.05",
        help="Comma-separated algorithm labels (default: S|-|-,EP|H|-,LE|H|-,"
        "EP|X|0.05)",
    )
    experiment.add_argument(
        "--seeds", type=_positive_int, default=3, help="Seeds 0..N-1 (default: 3)"
    )
    experiment.add_argument(
        "--output", "-o", type=Path, required=True, help="Experiment directory"
    )

    return parser
