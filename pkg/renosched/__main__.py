#!/usr/bin/env python3
"""
renosched entry point: subcommand dispatch and optimization runs
"""

import logging
import os
import sys
from collections.abc import Sequence
from dataclasses import replace
from pathlib import Path
from typing import assert_never

from .archive import RunArchive, RunConfig
from .cache import ScenarioCache
from .cli import Command, OutputFormat, create_argument_parser
from .config import DEFAULT_HORIZON, LOG_LEVEL_ENV
from .errors import DataError, ExitCode, RenoschedError
from .evolve import EvolveConfig, RunBudget, RunHistory, evolve_run
from .instgen import (
    GenConfig,
    VariantName,
    generate,
    load_instance,
    save_instance,
    variant,
)
from .metrics import NormalizationBounds, compute_metrics, pilot_bounds
from .network import apply_scenario, closure_edit, load_demand, load_graph
from .output import append_to_file, csv_text, write_to_file
from .plbe import build_evaluator, parse_algorithm_label
from .plots import plot_history
from .simulation import ScenarioSimulator, TapSettings
from .tap import solve_ue
from .upper import Instance

logger = logging.getLogger(__name__)

SUMMARY_FIELDS = (
    "algorithm",
    "seed",
    "generations",
    "hypervolume",
    "min_dist",
    "max_spread",
    "pf_size",
    "unique_sims",
    "wall_seconds",
    "aborted",
)


def setup_logging() -> None:
    """Setup logging to stderr, level from the environment."""
    level_name = os.environ.get(LOG_LEVEL_ENV, "INFO").strip().upper()
    level = logging.getLevelNamesMapping().get(level_name)
    logging.basicConfig(
        level=logging.INFO if level is None else level,
        format="%(message)s",
        stream=sys.stderr,
    )
    if level is None:
        logger.warning(
            "⚠️  Warning: Unknown log level %r in %s, using INFO",
            level_name,
            LOG_LEVEL_ENV,
        )


def run_tap(  # noqa: PLR0913
    net: Path,
    trips: Path,
    scenario: str | None,
    tol: float,
    max_iters: int,
    output: Path | None,
) -> ExitCode:
    """Solve one network, optionally with links closed."""
    graph = load_graph(net)
    demand = load_demand(trips, graph)
    edits = []
    if scenario is not None:
        if len(scenario) != graph.n_links:
            msg = f"scenario has {len(scenario)} bits for {graph.n_links} links"
            raise DataError(msg)
        edits = [
            closure_edit(link)
            for link, bit in zip(graph.links, scenario, strict=True)
            if bit == "1"
        ]

    logger.info("🔍 Solving %d links, %d OD pairs", graph.n_links, len(demand))
    result = solve_ue(apply_scenario(graph, edits), demand, tol, max_iters)
    logger.info(
        "📊 stt=%.1f gap=%.2e iterations=%d",
        result.system_travel_time,
        result.relative_gap,
        result.iterations,
    )

    if output is None:
        sys.stdout.write(result.to_csv())
        return ExitCode.OK
    sidecar = output.with_suffix(".json")
    if not (
        write_to_file(result.to_csv(), output)
        and write_to_file(result.sidecar_json() + "\n", sidecar)
    ):
        msg = f"Could not write TAP result to {output}"
        raise DataError(msg)
    logger.info("📄 Flows saved to %s, summary to %s", output, sidecar)
    return ExitCode.OK


def run_generate(  # noqa: PLR0913
    net: Path,
    trips: Path,
    seed: int,
    variant_name: VariantName | None,
    horizon: int | None,
    demand_scale: float,
    output: Path,
) -> ExitCode:
    config = GenConfig(seed=seed, horizon=horizon or DEFAULT_HORIZON)
    if variant_name is not None:
        config = variant(config, variant_name)
    config = replace(config, demand_scale=config.demand_scale * demand_scale)
    graph = load_graph(net)
    instance = generate(
        graph,
        load_demand(trips, graph),
        config,
        source={"net": str(net.resolve()), "trips": str(trips.resolve())},
    )
    if not save_instance(instance, output):
        msg = f"Could not write instance to {output}"
        raise DataError(msg)
    logger.info("📄 Instance saved to %s", output)
    return ExitCode.OK


def shared_bounds(
    instance: Instance, settings: TapSettings, workers: int
) -> NormalizationBounds:
    """Normalization bounds from a pilot run on its own scenario cache."""
    simulator = ScenarioSimulator(
        instance, ScenarioCache(instance.n_projects), settings, workers
    )
    return pilot_bounds(simulator)


def execute_run(
    instance: Instance, config: RunConfig, archive: RunArchive
) -> RunHistory:
    """Optimize with a fresh scenario cache and write the run archive."""
    settings = TapSettings(config.tap_tol, config.tap_max_iters)
    if config.bounds is None:
        config.bounds = shared_bounds(instance, settings, config.workers)

    simulator = ScenarioSimulator(
        instance, ScenarioCache(instance.n_projects), settings, config.workers
    )
    evaluator = build_evaluator(
        config.evaluator,
        instance,
        simulator,
        config.variant,
        config.surrogate,
        trace=config.trace,
    )
    logger.info(
        "🔍 Running %s with seed %d (%s)", config.label, config.seed, config.budget
    )
    history = evolve_run(
        instance,
        evaluator,
        EvolveConfig(
            population_size=config.population_size,
            crossover_rate=config.crossover_rate,
            mutation_rate=config.mutation_rate,
            seed=config.seed,
            budget=RunBudget.parse(config.budget),
        ),
        config.bounds,
    )

    written = [
        archive.write_config(config),
        archive.write_instance(instance),
        archive.write_history(history.records),
        archive.write_front(history.archive.sorted_members()),
        archive.write_cache(simulator.cache),
    ]
    if evaluator.trace is not None:
        written.append(archive.write_trace(evaluator.trace))
    plot_history({config.label: history.records}, archive.plots_dir)
    if not all(written):
        logger.warning("⚠️  Warning: Archive %s is incomplete", archive.directory)
    else:
        logger.info("✅ Run archive saved to %s", archive.directory)
    return history


def run_optimize(args_config: RunConfig, archive_dir: Path) -> ExitCode:
    instance = load_instance(Path(args_config.instance))
    history = execute_run(instance, args_config, RunArchive(archive_dir))
    if history.aborted is not None:
        logger.error("❌ Run aborted: %s", history.aborted)
        return ExitCode.DATA
    if history.records:
        last = history.records[-1]
        logger.info(
            "📊 Final front: %d points, hv=%.4f after %d generations, %d simulations",
            last.pf_size,
            last.hypervolume,
            last.generation,
            last.unique_sims,
        )
    return ExitCode.OK


def run_metrics(
    archive_dirs: Sequence[Path], output_format: OutputFormat
) -> ExitCode:
    """Recompute front metrics from front.csv and the stored bounds."""
    rows = []
    for directory in archive_dirs:
        archive = RunArchive(directory)
        config = archive.read_config()
        if config.bounds is None:
            msg = f"{archive.config_path} has no normalization bounds"
            raise DataError(msg)
        snapshot = compute_metrics(archive.read_front(), config.bounds)
        history = archive.read_history()
        if history:
            last = history[-1]
            recorded = (last.hypervolume, last.min_dist, last.max_spread, last.pf_size)
            recomputed = (
                snapshot.hypervolume,
                snapshot.min_dist,
                snapshot.max_spread,
                snapshot.pf_size,
            )
            if recorded != recomputed:
                logger.warning(
                    "⚠️  Warning: %s metrics differ from its history", directory
                )
        rows.append(
            {
                "archive": str(directory),
                "algorithm": config.label,
                "seed": config.seed,
                "generations": history[-1].generation if history else 0,
                **snapshot.to_dict(),
                "unique_sims": history[-1].unique_sims if history else 0,
            }
        )
    sys.stdout.write(output_format.format(rows) + "\n")
    return ExitCode.OK


def run_plot(archive_dirs: Sequence[Path], output: Path | None) -> ExitCode:
    histories = {}
    for directory in archive_dirs:
        archive = RunArchive(directory)
        config = archive.read_config()
        name = f"{config.label} seed {config.seed}"
        if name in histories:
            name = f"{name} ({directory.name})"
        histories[name] = archive.read_history()
    plots_dir = output or RunArchive(archive_dirs[0]).plots_dir
    if not plot_history(histories, plots_dir):
        msg = f"Could not write plots to {plots_dir}"
        raise DataError(msg)
    return ExitCode.OK


def _slug(label: str) -> str:
    return label.replace("|", "_").replace("-", "x")


def run_experiment(  # noqa: PLR0913
    instance_file: Path,
    labels: Sequence[str],
    seeds: int,
    template: RunConfig,
    output: Path,
) -> ExitCode:
    """Every algorithm over seeds 0..seeds-1, sharing one set of bounds."""
    instance = load_instance(instance_file)
    algorithms = [parse_algorithm_label(label) for label in labels]
    settings = TapSettings(template.tap_tol, template.tap_max_iters)
    bounds = shared_bounds(instance, settings, template.workers)

    summary = output / "summary.csv"
    if not write_to_file(csv_text(SUMMARY_FIELDS, []), summary):
        msg = f"Could not write {summary}"
        raise DataError(msg)

    failures = 0
    for kind, pruning, surrogate in algorithms:
        for seed in range(seeds):
            config = RunConfig(
                instance=str(instance_file),
                evaluator=kind,
                variant=pruning,
                surrogate=surrogate,
                seed=seed,
                budget=template.budget,
                population_size=template.population_size,
                workers=template.workers,
                tap_tol=template.tap_tol,
                tap_max_iters=template.tap_max_iters,
                bounds=bounds,
            )
            archive = RunArchive(output / _slug(config.label) / f"seed-{seed}")
            history = execute_run(instance, config, archive)
            failures += history.aborted is not None
            last = history.records[-1] if history.records else None
            row = [
                config.label,
                seed,
                last.generation if last else 0,
                last.hypervolume if last else 0.0,
                last.min_dist if last else float("inf"),
                last.max_spread if last else 0.0,
                last.pf_size if last else 0,
                last.unique_sims if last else 0,
                last.wall_seconds if last else 0.0,
                history.aborted or "",
            ]
            # header line is dropped, the file already has one
            line = csv_text(SUMMARY_FIELDS, [row]).split("\n", 1)[1]
            append_to_file(line, summary)

    logger.info("📊 Experiment summary saved to %s", summary)
    return ExitCode.DATA if failures else ExitCode.OK


def run_command(argv: Sequence[str] | None = None) -> int:
    """Parse arguments and run one subcommand; returns the process exit code."""
    parser = create_argument_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else ExitCode.USAGE

    command = Command(args.command)
    try:
        match command:
            case Command.TAP:
                return run_tap(
                    args.net,
                    args.trips,
                    args.scenario,
                    args.tol,
                    args.max_iters,
                    args.output,
                )
            case Command.GENERATE:
                return run_generate(
                    args.net,
                    args.trips,
                    args.seed,
                    args.variant,
                    args.horizon,
                    args.demand_scale,
                    args.output,
                )
            case Command.OPTIMIZE:
                config = RunConfig(
                    instance=str(args.instance),
                    evaluator=args.evaluator,
                    variant=args.variant,
                    surrogate=args.surrogate,
                    seed=args.seed,
                    budget=args.budget,
                    population_size=args.population,
                    workers=args.workers,
                    tap_tol=args.tol,
                    tap_max_iters=args.max_iters,
                    trace=args.trace,
                )
                return run_optimize(config, args.archive)
            case Command.METRICS:
                return run_metrics(args.archive, args.format)
            case Command.PLOT:
                return run_plot(args.archive, args.output)
            case Command.EXPERIMENT:
                template = RunConfig(
                    instance=str(args.instance),
                    budget=args.budget,
                    population_size=args.population,
                    workers=args.workers,
                    tap_tol=args.tol,
                    tap_max_iters=args.max_iters,
                )
                labels = [s for s in args.algorithms.split(",") if s.strip()]
                return run_experiment(
                    args.instance, labels, args.seeds, template, args.output
                )
            case _:
                assert_never(command)
    except RenoschedError as e:
        logger.error("❌ %s", e)
        return e.exit_code
    except ValueError as e:
        logger.error("❌ Invalid arguments: %s", e)
        return ExitCode.USAGE


def main() -> None:
    """Main function."""
    setup_logging()
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
