"""
Progressive lower-bound evaluation of offspring, and the full-simulation baseline
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, replace
from enum import StrEnum
from itertools import chain
from typing import assert_never

import numpy as np

from .cache import ScenarioCache
from .evolve import EvalStatus, EvaluationBatch, Individual, Objectives
from .simulation import ScenarioSimulator
from .surrogate import Surrogate, SurrogateKind, build_surrogate
from .upper import (
    EMPTY_SCENARIO,
    Instance,
    Scenario,
    Schedule,
    delay_from_scenarios,
    risk,
    scenarios_of,
    ttd,
)

logger = logging.getLogger(__name__)

TRACE_FIELDS = (
    "generation",
    "genotype_hash",
    "sims_spent",
    "status",
    "ttd_or_estimate",
    "risk",
)


class EvaluatorKind(StrEnum):
    STANDARD = "standard"
    PLBE = "plbe"


class PruningVariant(StrEnum):
    """What happens to an offspring once its lower bound is dominated."""

    ELIMINATION = "ep"
    LAZY = "le"

    @property
    def label(self) -> str:
        return self.value.upper()


@dataclass(frozen=True)
class EvalOutcome:
    individual: Individual
    status: EvalStatus
    objectives: Objectives
    sims_spent: int


@dataclass(frozen=True)
class TraceRow:
    generation: int
    genotype_hash: str
    sims_spent: int
    status: EvalStatus
    ttd_or_estimate: float
    risk: float

    def as_row(self) -> list[str]:
        return [
            str(self.generation),
            self.genotype_hash,
            str(self.sims_spent),
            str(self.status),
            repr(self.ttd_or_estimate),
            repr(self.risk),
        ]


def _estimate_from_scenarios(
    instance: Instance,
    scenarios: Sequence[tuple[Scenario, int]],
    cache: ScenarioCache,
    surrogate: Surrogate,
) -> float:
    uncached = [s for s, _ in scenarios if s not in cache]
    estimates = dict(zip(uncached, surrogate.estimate(uncached), strict=True))

    def value(scenario: Scenario) -> float:
        stt = cache.get(scenario)
        return estimates[scenario] if stt is None else stt

    return delay_from_scenarios(instance, scenarios, cache.base_stt, value)


def estimate_ttd_lb(
    instance: Instance, schedule: Schedule, cache: ScenarioCache, surrogate: Surrogate
) -> float:
    """Travel delay with cached scenarios exact and the rest from the surrogate."""
    return _estimate_from_scenarios(
        instance, scenarios_of(instance, schedule), cache, surrogate
    )


def is_dominated(candidate: Objectives, others: Sequence[Objectives]) -> bool:
    """Strict Pareto dominance by any of the others; equal points do not dominate."""
    if not others:
        return False
    points = np.asarray(others, dtype=np.float64)
    weakly_better = np.all(points <= candidate, axis=1)
    strictly_better = np.any(points < candidate, axis=1)
    return bool(np.any(weakly_better & strictly_better))


def select_next_scenario(
    remaining: Sequence[tuple[Scenario, int]], n_projects: int
) -> Scenario:
    """Most frequent scenario, then fewest projects, then smallest bitstring."""
    scenario, _ = min(
        remaining, key=lambda item: (-item[1], len(item[0]), item[0].bits(n_projects))
    )
    return scenario


def _attribute(outcome: EvalOutcome) -> None:
    ind = outcome.individual
    ind.objectives = outcome.objectives
    ind.status = outcome.status
    ind.sims_spent = outcome.sims_spent


class _TracingEvaluator:
    trace: list[TraceRow] | None

    def _trace(self, generation: int, outcomes: Sequence[EvalOutcome]) -> None:
        if self.trace is None:
            return
        self.trace.extend(
            TraceRow(
                generation=generation,
                genotype_hash=o.individual.schedule.genotype_hash,
                sims_spent=o.sims_spent,
                status=o.status,
                ttd_or_estimate=o.objectives[0],
                risk=o.objectives[1],
            )
            for o in outcomes
        )


class StandardEvaluator(_TracingEvaluator):
    """Simulates every uncached scenario of every offspring."""

    label = "S|-|-"

    def __init__(
        self, instance: Instance, simulator: ScenarioSimulator, *, trace: bool = False
    ) -> None:
        self.instance = instance
        self.simulator = simulator
        self.trace = [] if trace else None

    @property
    def simulations(self) -> int:
        return self.simulator.simulations

    def evaluate(
        self, parents: Sequence[Individual], offspring: Sequence[Individual]
    ) -> list[EvalOutcome]:
        del parents
        cache = self.simulator.cache
        per_offspring = [scenarios_of(self.instance, o.schedule) for o in offspring]
        new = set(
            self.simulator.simulate_many(
                chain(
                    [EMPTY_SCENARIO],
                    (s for scenarios in per_offspring for s, _ in scenarios),
                )
            )
        )
        outcomes = []
        for ind, scenarios in zip(offspring, per_offspring, strict=True):
            # new simulations count for the first offspring that needed them
            mine = {s for s, _ in scenarios} & new
            new -= mine
            outcomes.append(
                EvalOutcome(
                    ind,
                    EvalStatus.EXACT,
                    (
                        ttd(self.instance, ind.schedule, cache),
                        risk(self.instance, ind.schedule),
                    ),
                    len(mine),
                )
            )
        if outcomes and new:
            first = outcomes[0]
            outcomes[0] = replace(first, sims_spent=first.sims_spent + len(new))
        return outcomes

    def evaluate_batch(
        self,
        parents: Sequence[Individual],
        offspring: Sequence[Individual],
        generation: int,
    ) -> EvaluationBatch:
        outcomes = self.evaluate(parents, offspring)
        for outcome in outcomes:
            _attribute(outcome)
        self._trace(generation, outcomes)
        return EvaluationBatch(
            survivors=[o.individual for o in outcomes], exact=len(outcomes)
        )

    def end_generation(self) -> None:
        pass


class PlbeEvaluator(_TracingEvaluator):
    """Simulates scenarios one at a time until the offspring is exact or dominated."""

    def __init__(
        self,
        instance: Instance,
        simulator: ScenarioSimulator,
        surrogate: Surrogate,
        variant: PruningVariant,
        *,
        trace: bool = False,
    ) -> None:
        self.instance = instance
        self.simulator = simulator
        self.surrogate = surrogate
        self.variant = variant
        self.trace = [] if trace else None
        self.marked: dict[str, Objectives] = {}
        self.skipped = 0
        self.label = f"{variant.label}|{surrogate.label}"

    @property
    def simulations(self) -> int:
        return self.simulator.simulations

    def _evaluate_one(
        self, ind: Individual, reference: Sequence[Objectives], sims: int = 0
    ) -> EvalOutcome:
        instance, cache = self.instance, self.simulator.cache
        r = risk(instance, ind.schedule)
        scenarios = scenarios_of(instance, ind.schedule)
        while remaining := [(s, m) for s, m in scenarios if s not in cache]:
            estimate = _estimate_from_scenarios(
                instance, scenarios, cache, self.surrogate
            )
            if is_dominated((estimate, r), reference):
                return EvalOutcome(ind, EvalStatus.PRUNED, (estimate, r), sims)
            _, inserted = self.simulator.simulate(
                select_next_scenario(remaining, instance.n_projects)
            )
            sims += int(inserted)
        total = ttd(instance, ind.schedule, cache)
        return EvalOutcome(ind, EvalStatus.EXACT, (total, r), sims)

    def evaluate(
        self, parents: Sequence[Individual], offspring: Sequence[Individual]
    ) -> list[EvalOutcome]:
        """Offspring in genotype order against parents and earlier exact offspring."""
        _, base_inserted = self.simulator.simulate(EMPTY_SCENARIO)
        pending = int(base_inserted)
        # marked estimates are not exact and never prune others
        reference = [
            p.objectives
            for p in parents
            if p.objectives is not None and p.status is not EvalStatus.PRUNED
        ]
        outcomes: dict[int, EvalOutcome] = {}
        order = sorted(range(len(offspring)), key=lambda i: offspring[i].schedule.start)
        for i in order:
            ind = offspring[i]
            if self.variant is PruningVariant.ELIMINATION and (
                ind.schedule.genotype_hash in self.marked
            ):
                self.skipped += 1
                continue
            outcome = self._evaluate_one(ind, reference, pending)
            pending = 0
            outcomes[i] = outcome
            match outcome.status:
                case EvalStatus.EXACT:
                    reference.append(outcome.objectives)
                case EvalStatus.PRUNED:
                    if self.variant is PruningVariant.ELIMINATION:
                        self.marked[ind.schedule.genotype_hash] = outcome.objectives
                case EvalStatus.UNEVALUATED:
                    msg = "evaluation finished without a status"
                    raise AssertionError(msg)
                case _:
                    assert_never(outcome.status)
        return [outcomes[i] for i in sorted(outcomes)]

    def evaluate_batch(
        self,
        parents: Sequence[Individual],
        offspring: Sequence[Individual],
        generation: int,
    ) -> EvaluationBatch:
        outcomes = self.evaluate(parents, offspring)
        for outcome in outcomes:
            _attribute(outcome)
        self._trace(generation, outcomes)
        exact = [o.individual for o in outcomes if o.status is EvalStatus.EXACT]
        pruned = [o.individual for o in outcomes if o.status is EvalStatus.PRUNED]
        match self.variant:
            case PruningVariant.ELIMINATION:
                survivors = [o.individual for o in outcomes]
            case PruningVariant.LAZY:
                survivors = exact
            case _:
                assert_never(self.variant)
        return EvaluationBatch(
            survivors=survivors, exact=len(exact), pruned=len(pruned)
        )

    def end_generation(self) -> None:
        self.surrogate.refresh()


Evaluator = StandardEvaluator | PlbeEvaluator


def evaluate(
    evaluator: Evaluator,
    parents: Sequence[Individual],
    offspring: Sequence[Individual],
) -> list[EvalOutcome]:
    return evaluator.evaluate(parents, offspring)


def algorithm_label(
    kind: EvaluatorKind, variant: PruningVariant, surrogate: SurrogateKind
) -> str:
    """Short run label such as `S|-|-`, `LE|H|-` or `EP|X|0.05`."""
    match kind:
        case EvaluatorKind.STANDARD:
            return StandardEvaluator.label
        case EvaluatorKind.PLBE:
            return f"{variant.label}|{surrogate.label}"
        case _:
            assert_never(kind)


def parse_algorithm_label(
    label: str,
) -> tuple[EvaluatorKind, PruningVariant, SurrogateKind]:
    """Inverse of `algorithm_label`."""
    label = label.strip()
    if label == StandardEvaluator.label:
        return (
            EvaluatorKind.STANDARD,
            PruningVariant.ELIMINATION,
            SurrogateKind.HEURISTIC,
        )
    head, _, rest = label.partition("|")
    try:
        variant = PruningVariant(head.lower())
    except ValueError as e:
        msg = f"unknown algorithm label {label!r}"
        raise ValueError(msg) from e
    for kind in SurrogateKind:
        if kind.label == rest:
            return EvaluatorKind.PLBE, variant, kind
    msg = f"unknown surrogate in algorithm label {label!r}"
    raise ValueError(msg)


def build_evaluator(  # noqa: PLR0913
    kind: EvaluatorKind,
    instance: Instance,
    simulator: ScenarioSimulator,
    variant: PruningVariant = PruningVariant.ELIMINATION,
    surrogate: SurrogateKind = SurrogateKind.HEURISTIC,
    *,
    trace: bool = False,
) -> Evaluator:
    match kind:
        case EvaluatorKind.STANDARD:
            return StandardEvaluator(instance, simulator, trace=trace)
        case EvaluatorKind.PLBE:
            return PlbeEvaluator(
                instance,
                simulator,
                build_surrogate(surrogate, simulator.cache),
                variant,
                trace=trace,
            )
        case _:
            assert_never(kind)
