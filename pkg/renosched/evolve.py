"""
NSGA-II over integer start-period genotypes
"""

import logging
import math
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from enum import StrEnum
from typing import Protocol

import numpy as np
from pymoo.util.nds.non_dominated_sorting import NonDominatedSorting

from .config import (
    CROSSOVER_GENE_SWAP_PROB,
    DEFAULT_CROSSOVER_RATE,
    DEFAULT_POPULATION_SIZE,
    MUTATION_MAX_STEP,
)
from .errors import InfeasibleError, RenoschedError
from .metrics import NormalizationBounds, compute_metrics
from .upper import Instance, Schedule, repair

logger = logging.getLogger(__name__)

Objectives = tuple[float, float]

_MUTATION_STEPS = np.array(
    [s for s in range(-MUTATION_MAX_STEP, MUTATION_MAX_STEP + 1) if s != 0]
)
_MAX_INIT_ATTEMPTS_PER_MEMBER = 100


class EvalStatus(StrEnum):
    UNEVALUATED = "unevaluated"
    EXACT = "exact"
    PRUNED = "pruned"


@dataclass
class Individual:
    """Schedule with its (TTD, R) objectives; pruned ones carry their estimate."""

    schedule: Schedule
    objectives: Objectives | None = None
    rank: int | None = None
    crowding: float | None = None
    status: EvalStatus = EvalStatus.UNEVALUATED
    sims_spent: int = 0


@dataclass
class Population:
    members: list[Individual]
    generation: int = 0


@dataclass
class EvaluationBatch:
    """Offspring that enter survival selection, plus per-generation counts."""

    survivors: list[Individual]
    exact: int = 0
    pruned: int = 0


class Evaluator(Protocol):
    label: str

    @property
    def simulations(self) -> int: ...

    def evaluate_batch(
        self,
        parents: Sequence[Individual],
        offspring: Sequence[Individual],
        generation: int,
    ) -> EvaluationBatch: ...

    def end_generation(self) -> None: ...


def dominates(a: Objectives, b: Objectives) -> bool:
    """Minimization dominance: a <= b everywhere and a < b somewhere."""
    return a[0] <= b[0] and a[1] <= b[1] and (a[0] < b[0] or a[1] < b[1])


def non_dominated_sort(points: Sequence[Objectives]) -> list[list[int]]:
    """Pareto fronts as lists of point indices, best front first."""
    if not points:
        return []
    fronts = NonDominatedSorting().do(np.asarray(points, dtype=np.float64))
    return [sorted(int(i) for i in front) for front in fronts]


def crowding_distance(front: Sequence[Objectives]) -> list[float]:
    """Crowding distance of each point of one front; extremes are infinite."""
    n = len(front)
    if n <= 2:  # noqa: PLR2004
        return [math.inf] * n
    values = np.asarray(front, dtype=np.float64)
    distances = np.zeros(n)
    for objective in range(values.shape[1]):
        order = np.argsort(values[:, objective], kind="stable")
        column = values[order, objective]
        distances[order[0]] = distances[order[-1]] = math.inf
        spread = column[-1] - column[0]
        if spread == 0:
            continue
        distances[order[1:-1]] += (column[2:] - column[:-2]) / spread
    return distances.tolist()


def assign_rank_and_crowding(individuals: Sequence[Individual]) -> list[list[int]]:
    points = [_objectives(ind) for ind in individuals]
    fronts = non_dominated_sort(points)
    for rank, front in enumerate(fronts):
        distances = crowding_distance([points[i] for i in front])
        for i, distance in zip(front, distances, strict=True):
            individuals[i].rank = rank
            individuals[i].crowding = distance
    return fronts


def _objectives(individual: Individual) -> Objectives:
    if individual.objectives is None:
        msg = "individual has not been evaluated"
        raise ValueError(msg)
    return individual.objectives


def tournament_select(
    population: Sequence[Individual], rng: np.random.Generator
) -> Individual:
    """Binary tournament on rank, then crowding, then a coin flip; the two
    contestants are distinct members (drawn without replacement)."""
    if len(population) == 1:
        return population[0]
    i, j = rng.choice(len(population), size=2, replace=False)
    a, b = population[int(i)], population[int(j)]
    rank_a, rank_b = a.rank or 0, b.rank or 0
    if rank_a != rank_b:
        return a if rank_a < rank_b else b
    crowd_a, crowd_b = a.crowding or 0.0, b.crowding or 0.0
    if crowd_a != crowd_b:
        return a if crowd_a > crowd_b else b
    return a if rng.random() < 0.5 else b  # noqa: PLR2004


def uniform_crossover(
    a: Schedule, b: Schedule, rng: np.random.Generator, rate: float
) -> tuple[Schedule, Schedule]:
    """Swap each gene with probability one half when crossover fires."""
    if rng.random() >= rate:
        return a, b
    swap = rng.random(len(a)) < CROSSOVER_GENE_SWAP_PROB
    pairs = list(zip(a.start, b.start, swap, strict=True))
    first = tuple(y if s else x for x, y, s in pairs)
    second = tuple(x if s else y for x, y, s in pairs)
    return Schedule(first), Schedule(second)


def crossover(
    instance: Instance,
    a: Schedule,
    b: Schedule,
    rng: np.random.Generator,
    rate: float = DEFAULT_CROSSOVER_RATE,
) -> tuple[Schedule, Schedule]:
    """Uniform crossover with repaired children; the parents stand in on failure."""
    first, second = uniform_crossover(a, b, rng, rate)
    try:
        return repair(instance, first, rng), repair(instance, second, rng)
    except InfeasibleError:
        return a, b


def perturb(
    instance: Instance, s: Schedule, rng: np.random.Generator, rate: float
) -> Schedule:
    """Shift genes by a non-zero step in [-4, 4], clamped to their deadlines."""
    mutated = rng.random(len(s)) < rate
    steps = rng.choice(_MUTATION_STEPS, size=len(s))
    start = tuple(
        min(max(t + int(step), 0), p.latest_start) if flip else t
        for t, step, flip, p in zip(
            s.start, steps, mutated, instance.projects, strict=True
        )
    )
    return Schedule(start)


def mutate(
    instance: Instance,
    s: Schedule,
    rng: np.random.Generator,
    rate: float | None = None,
) -> Schedule:
    """Perturbed and repaired copy; the input schedule comes back on failure."""
    if rate is None:
        rate = 1.0 / max(1, instance.n_projects)
    try:
        return repair(instance, perturb(instance, s, rng, rate), rng)
    except InfeasibleError:
        return s


def random_schedule(instance: Instance, rng: np.random.Generator) -> Schedule:
    return Schedule(
        tuple(int(rng.integers(0, p.latest_start + 1)) for p in instance.projects)
    )


def initial_population(
    instance: Instance, size: int, rng: np.random.Generator
) -> list[Individual]:
    """Uniform-random genotypes passed through repair."""
    members: list[Individual] = []
    attempts = 0
    while len(members) < size:
        attempts += 1
        if attempts > size * _MAX_INIT_ATTEMPTS_PER_MEMBER:
            msg = "could not build a feasible initial population"
            raise InfeasibleError(msg)
        try:
            schedule = repair(instance, random_schedule(instance, rng), rng)
        except InfeasibleError:
            continue
        members.append(Individual(schedule))
    return members


def survive(merged: Sequence[Individual], size: int) -> list[Individual]:
    """Truncate by front, filling the last admitted front by crowding distance."""
    fronts = assign_rank_and_crowding(merged)
    selected: list[Individual] = []
    for front in fronts:
        if len(selected) + len(front) <= size:
            selected.extend(merged[i] for i in front)
            continue
        by_crowding = sorted(front, key=lambda i: (-(merged[i].crowding or 0.0), i))
        selected.extend(merged[i] for i in by_crowding[: size - len(selected)])
        break
    return selected


class ParetoArchive:
    """Exact, mutually non-dominated individuals seen so far."""

    def __init__(self) -> None:
        self.members: list[Individual] = []

    def __len__(self) -> int:
        return len(self.members)

    def update(self, individuals: Sequence[Individual]) -> None:
        known = {m.schedule for m in self.members}
        candidates = list(self.members)
        for ind in individuals:
            if ind.status is EvalStatus.EXACT and ind.schedule not in known:
                known.add(ind.schedule)
                candidates.append(ind)
        if not candidates:
            return
        fronts = non_dominated_sort([_objectives(c) for c in candidates])
        self.members = [candidates[i] for i in fronts[0]]

    def points(self) -> list[Objectives]:
        return sorted(_objectives(m) for m in self.members)

    def sorted_members(self) -> list[Individual]:
        return sorted(self.members, key=lambda m: (_objectives(m), m.schedule.start))


@dataclass(frozen=True)
class RunBudget:
    """Stopping rule checked at generation boundaries."""

    max_generations: int | None = None
    max_seconds: float | None = None
    max_simulations: int | None = None

    @classmethod
    def parse(cls, text: str) -> "RunBudget":
        """`iters=N`, `seconds=S` or `sims=N`, comma-separated."""
        budget = cls()
        for part in filter(None, (p.strip() for p in text.split(","))):
            key, _, value = part.partition("=")
            try:
                match key.strip():
                    case "iters":
                        budget = replace(budget, max_generations=int(value))
                    case "seconds":
                        budget = replace(budget, max_seconds=float(value))
                    case "sims":
                        budget = replace(budget, max_simulations=int(value))
                    case _:
                        msg = f"unknown budget key {key!r}"
                        raise ValueError(msg)
            except ValueError as e:
                msg = f"invalid budget {text!r}: {e}"
                raise ValueError(msg) from e
        if budget == cls():
            msg = f"budget {text!r} sets no limit"
            raise ValueError(msg)
        return budget

    def exhausted(self, generation: int, seconds: float, simulations: int) -> bool:
        return (
            (self.max_generations is not None and generation >= self.max_generations)
            or (self.max_seconds is not None and seconds >= self.max_seconds)
            or (
                self.max_simulations is not None
                and simulations >= self.max_simulations
            )
        )

    def __str__(self) -> str:
        parts = []
        if self.max_generations is not None:
            parts.append(f"iters={self.max_generations}")
        if self.max_seconds is not None:
            parts.append(f"seconds={self.max_seconds:g}")
        if self.max_simulations is not None:
            parts.append(f"sims={self.max_simulations}")
        return ",".join(parts)


@dataclass(frozen=True)
class EvolveConfig:
    population_size: int = DEFAULT_POPULATION_SIZE
    crossover_rate: float = DEFAULT_CROSSOVER_RATE
    mutation_rate: float | None = None
    seed: int = 0
    budget: RunBudget = field(default_factory=lambda: RunBudget(max_generations=50))

    def __post_init__(self) -> None:
        if self.population_size < 2 or self.population_size % 2:  # noqa: PLR2004
            msg = "population size must be a positive even number"
            raise ValueError(msg)


HISTORY_FIELDS = (
    "generation",
    "hypervolume",
    "min_dist",
    "max_spread",
    "pf_size",
    "unique_sims",
    "wall_seconds",
    "evaluations",
    "pruned",
)


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    hypervolume: float
    min_dist: float
    max_spread: float
    pf_size: int
    unique_sims: int
    wall_seconds: float
    evaluations: int = 0
    pruned: int = 0


@dataclass
class RunHistory:
    records: list[GenerationRecord]
    population: list[Individual]
    archive: ParetoArchive
    bounds: NormalizationBounds
    aborted: str | None = None


def make_offspring(
    instance: Instance,
    population: Sequence[Individual],
    size: int,
    rng: np.random.Generator,
    config: EvolveConfig,
) -> list[Individual]:
    offspring: list[Individual] = []
    while len(offspring) < size:
        first = tournament_select(population, rng).schedule
        second = tournament_select(population, rng).schedule
        first, second = crossover(instance, first, second, rng, config.crossover_rate)
        offspring.append(Individual(mutate(instance, first, rng, config.mutation_rate)))
        if len(offspring) < size:
            offspring.append(
                Individual(mutate(instance, second, rng, config.mutation_rate))
            )
    return offspring


def _default_bounds(instance: Instance, archive: ParetoArchive) -> NormalizationBounds:
    ttd_hi = max((p[0] for p in archive.points()), default=0.0)
    return NormalizationBounds(
        ttd_lo=0.0,
        ttd_hi=ttd_hi if ttd_hi > 0 else 1.0,
        r_lo=0.0,
        r_hi=instance.max_risk if instance.max_risk > 0 else 1.0,
    )


def evolve_run(  # noqa: PLR0913
    instance: Instance,
    evaluator: Evaluator,
    config: EvolveConfig,
    bounds: NormalizationBounds | None = None,
    on_generation: Callable[[GenerationRecord], None] | None = None,
    clock: Callable[[], float] = time.perf_counter,
) -> RunHistory:
    """Run NSGA-II until the budget is exhausted; returns the per-generation history."""
    rng = np.random.default_rng(config.seed)
    started = clock()
    archive = ParetoArchive()
    records: list[GenerationRecord] = []

    def record(
        generation: int, batch: EvaluationBatch, run_bounds: NormalizationBounds
    ) -> None:
        snapshot = compute_metrics(archive.points(), run_bounds)
        entry = GenerationRecord(
            generation=generation,
            hypervolume=snapshot.hypervolume,
            min_dist=snapshot.min_dist,
            max_spread=snapshot.max_spread,
            pf_size=snapshot.pf_size,
            unique_sims=evaluator.simulations,
            wall_seconds=clock() - started,
            evaluations=batch.exact,
            pruned=batch.pruned,
        )
        records.append(entry)
        logger.info(
            "📊 [%s] generation %d: hv=%.4f pf=%d sims=%d",
            evaluator.label,
            generation,
            entry.hypervolume,
            entry.pf_size,
            entry.unique_sims,
        )
        if on_generation is not None:
            on_generation(entry)

    members = initial_population(instance, config.population_size, rng)
    try:
        batch = evaluator.evaluate_batch([], members, 0)
    except RenoschedError as e:
        logger.error("❌ Evaluation of the initial population failed: %s", e)
        run_bounds = bounds or _default_bounds(instance, archive)
        return RunHistory(records, [], archive, run_bounds, aborted=str(e))
    evaluator.end_generation()
    population = survive(batch.survivors, config.population_size)
    archive.update(batch.survivors)
    run_bounds = bounds or _default_bounds(instance, archive)
    record(0, batch, run_bounds)

    generation = 0
    while not config.budget.exhausted(
        generation, clock() - started, evaluator.simulations
    ):
        generation += 1
        offspring = make_offspring(
            instance, population, config.population_size, rng, config
        )
        try:
            batch = evaluator.evaluate_batch(population, offspring, generation)
        except RenoschedError as e:
            logger.error("❌ Evaluation failed in generation %d: %s", generation, e)
            return RunHistory(records, population, archive, run_bounds, aborted=str(e))
        population = survive([*population, *batch.survivors], config.population_size)
        archive.update(batch.survivors)
        evaluator.end_generation()
        record(generation, batch, run_bounds)

    return RunHistory(records, population, archive, run_bounds)
