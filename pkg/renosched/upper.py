"""
Renovation scheduling model: projects, risk, constraints, repair and travel delay
"""

import hashlib
import logging
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from itertools import chain
from typing import TYPE_CHECKING, Any

import numpy as np
from scipy.stats import binom

from .config import HARD_DEADLINE_THRESHOLD
from .errors import DataError, InfeasibleError
from .network import DemandMatrix, Graph, ScenarioEdit, merge_edits

if TYPE_CHECKING:
    from .cache import ScenarioCache

logger = logging.getLogger(__name__)

_BUDGET_SLACK = 1e-9


@dataclass(frozen=True)
class Project:
    """Renovation project with its binomial failure model."""

    id: int
    duration: int
    cost: float
    failure_cost: float
    trial_prob: float
    allowed_successes: int
    hard_due: int
    edits: tuple[ScenarioEdit, ...] = ()

    def __post_init__(self) -> None:
        if self.duration < 1:
            msg = f"project {self.id}: duration must be at least 1"
            raise DataError(msg)
        if not 0 < self.trial_prob < 1:
            msg = f"project {self.id}: trial probability must lie in (0, 1)"
            raise DataError(msg)
        if self.allowed_successes < 0 or self.failure_cost < 0 or self.cost < 0:
            msg = f"project {self.id}: k_p, w_p and c_p must be non-negative"
            raise DataError(msg)

    @property
    def latest_start(self) -> int:
        return self.hard_due - self.duration


@dataclass(frozen=True, eq=False)
class Instance:
    """Scheduling problem over a road network."""

    horizon: int
    projects: tuple[Project, ...]
    budget: tuple[float, ...]
    max_simultaneous: int
    graph: Graph
    demand: DemandMatrix
    extrapolation: float = 1.0
    source: dict[str, Any] = field(default_factory=dict)
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.horizon < 1 or self.max_simultaneous < 1:
            msg = "horizon and max_simultaneous must be at least 1"
            raise DataError(msg)
        if len(self.budget) != self.horizon or any(b < 0 for b in self.budget):
            msg = "budget needs one non-negative entry per period"
            raise DataError(msg)
        for index, project in enumerate(self.projects):
            if project.id != index:
                msg = f"project ids must be dense from 0, found {project.id}"
                raise DataError(msg)
            if project.hard_due > self.horizon:
                msg = f"project {project.id}: hard due date beyond the horizon"
                raise DataError(msg)
            if project.latest_start < 0:
                msg = f"project {project.id}: cannot finish before its hard due date"
                raise DataError(msg)

    @property
    def n_projects(self) -> int:
        return len(self.projects)

    @property
    def work_sum(self) -> int:
        return sum(p.duration for p in self.projects)

    @property
    def max_risk(self) -> float:
        return sum(p.failure_cost for p in self.projects)


@dataclass(frozen=True)
class Schedule:
    """Start period of every project (the genotype)."""

    start: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.start)

    @property
    def genotype_hash(self) -> str:
        payload = ",".join(map(str, self.start)).encode()
        return hashlib.sha1(payload, usedforsecurity=False).hexdigest()[:16]

    def active_at(self, instance: Instance, period: int) -> tuple[int, ...]:
        return tuple(
            p.id
            for p in instance.projects
            if self.start[p.id] <= period < self.start[p.id] + p.duration
        )


@dataclass(frozen=True)
class Scenario:
    """Set of simultaneously active projects, kept sorted."""

    active: tuple[int, ...] = ()

    @classmethod
    def of(cls, projects: Iterable[int]) -> "Scenario":
        return cls(tuple(sorted(set(projects))))

    @classmethod
    def from_bits(cls, bits: str) -> "Scenario":
        return cls(tuple(i for i, bit in enumerate(bits) if bit == "1"))

    def __len__(self) -> int:
        return len(self.active)

    @property
    def mask(self) -> int:
        return sum(1 << p for p in self.active)

    def bits(self, n_projects: int) -> str:
        chars = ["0"] * n_projects
        for p in self.active:
            chars[p] = "1"
        return "".join(chars)

    def issubset(self, other: "Scenario") -> bool:
        return self.mask & ~other.mask == 0


EMPTY_SCENARIO = Scenario()


class ViolationKind(StrEnum):
    GENOTYPE = "genotype"
    DEADLINE = "deadline"
    SIMULTANEITY = "simultaneity"
    BUDGET = "budget"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    message: str
    period: int | None = None
    projects: tuple[int, ...] = ()

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


def failure_prob(project: Project, t: int) -> float:
    """Probability that more than k_p of t Bernoulli(v_p) trials succeed."""
    return binomial_failure_prob(project.trial_prob, project.allowed_successes, t)


def binomial_failure_prob(trial_prob: float, allowed_successes: int, t: int) -> float:
    # complementary CDF: 1 - P(X <= k), monotone in t and tending to 1
    if t <= allowed_successes:
        return 0.0
    return float(binom.sf(allowed_successes, t, trial_prob))


def hard_deadline(trial_prob: float, allowed_successes: int, horizon: int) -> int:
    """First period whose failure probability exceeds one half, capped at horizon."""
    t = allowed_successes + 1
    while t < horizon:
        probability = binomial_failure_prob(trial_prob, allowed_successes, t)
        if probability > HARD_DEADLINE_THRESHOLD:
            return t
        t += 1
    return horizon


def risk(instance: Instance, schedule: Schedule) -> float:
    """Expected emergency intervention cost of the schedule."""
    return float(
        sum(
            failure_prob(p, schedule.start[p.id]) * p.failure_cost
            for p in instance.projects
        )
    )


def _active_count(instance: Instance, start: Sequence[int], period: int) -> list[int]:
    return [
        p.id
        for p in instance.projects
        if start[p.id] <= period < start[p.id] + p.duration
    ]


def check_feasible(instance: Instance, schedule: Schedule) -> list[Violation]:
    """All constraint violations of the schedule; empty when feasible."""
    if len(schedule) != instance.n_projects:
        return [
            Violation(
                ViolationKind.GENOTYPE,
                f"genotype has {len(schedule)} genes "
                f"for {instance.n_projects} projects",
            )
        ]

    violations: list[Violation] = [
        Violation(
            ViolationKind.DEADLINE,
            f"project {p.id} starts at {schedule.start[p.id]}, "
            f"allowed range is [0, {p.latest_start}]",
            projects=(p.id,),
        )
        for p in instance.projects
        if not 0 <= schedule.start[p.id] <= p.latest_start
    ]

    spent = available = 0.0
    for period in range(instance.horizon):
        active = _active_count(instance, schedule.start, period)
        if len(active) > instance.max_simultaneous:
            violations.append(
                Violation(
                    ViolationKind.SIMULTANEITY,
                    f"{len(active)} projects active in period {period}, "
                    f"limit is {instance.max_simultaneous}",
                    period=period,
                    projects=tuple(active),
                )
            )
        starting = [p for p in instance.projects if schedule.start[p.id] == period]
        spent += sum(p.cost for p in starting)
        available += instance.budget[period]
        if spent > available + _BUDGET_SLACK * (1.0 + abs(available)):
            violations.append(
                Violation(
                    ViolationKind.BUDGET,
                    f"cumulative spending {spent:.2f} exceeds budget "
                    f"{available:.2f} by period {period}",
                    period=period,
                    projects=tuple(p.id for p in starting),
                )
            )
    return violations


def _conflict_at(instance: Instance, start: list[int], period: int) -> list[int]:
    """Projects that could be shifted to resolve a conflict in period."""
    active = _active_count(instance, start, period)
    if len(active) > instance.max_simultaneous:
        return active
    spent = sum(p.cost for p in instance.projects if start[p.id] <= period)
    available = sum(instance.budget[: period + 1])
    if spent > available + _BUDGET_SLACK * (1.0 + abs(available)):
        return [p.id for p in instance.projects if start[p.id] <= period]
    return []


def repair(
    instance: Instance, schedule: Schedule, rng: np.random.Generator
) -> Schedule:
    """Clamp genes into their deadlines, then shift conflicting projects later."""
    start = [
        min(max(t, 0), p.latest_start)
        for t, p in zip(schedule.start, instance.projects, strict=True)
    ]
    max_shifts = instance.n_projects * instance.horizon
    shifts = 0
    period = 0
    while period < instance.horizon:
        offenders = _conflict_at(instance, start, period)
        if not offenders:
            period += 1
            continue
        movable = [
            p for p in offenders if period + 1 <= instance.projects[p].latest_start
        ]
        if not movable or shifts >= max_shifts:
            msg = f"schedule cannot be repaired at period {period}"
            raise InfeasibleError(msg)
        latest_due = max(instance.projects[p].hard_due for p in movable)
        candidates = [p for p in movable if instance.projects[p].hard_due == latest_due]
        chosen = (
            candidates[int(rng.integers(len(candidates)))]
            if len(candidates) > 1
            else candidates[0]
        )
        start[chosen] = period + 1
        shifts += 1

    repaired = Schedule(tuple(start))
    return schedule if repaired == schedule else repaired


def repair_backward(instance: Instance, schedule: Schedule) -> Schedule:
    """Clamp genes, then end overlaps from the last period back by moving the
    earliest-starting offender earlier."""
    start = [
        min(max(t, 0), p.latest_start)
        for t, p in zip(schedule.start, instance.projects, strict=True)
    ]
    for period in range(instance.horizon - 1, -1, -1):
        while (
            len(active := _active_count(instance, start, period))
            > instance.max_simultaneous
        ):
            movable = [p for p in active if period >= instance.projects[p].duration]
            if not movable:
                msg = f"schedule cannot be moved earlier at period {period}"
                raise InfeasibleError(msg)
            chosen = min(movable, key=lambda p: (start[p], p))
            # finishes just before the conflicting period
            start[chosen] = period - instance.projects[chosen].duration
    return Schedule(tuple(start))


def latest_feasible_schedule(
    instance: Instance, rng: np.random.Generator
) -> Schedule:
    """Feasible schedule starting every project as late as the limits allow."""
    return repair(instance, repair_backward(instance, latest_schedule(instance)), rng)


def scenarios_of(
    instance: Instance, schedule: Schedule
) -> list[tuple[Scenario, int]]:
    """Distinct active-project sets over the horizon with their period counts."""
    counts: dict[Scenario, int] = {}
    for period in range(instance.horizon):
        scenario = Scenario(schedule.active_at(instance, period))
        counts[scenario] = counts.get(scenario, 0) + 1
    return list(counts.items())


def scenario_edits(instance: Instance, scenario: Scenario) -> list[ScenarioEdit]:
    """Network edits of all active projects, merged per link."""
    return merge_edits(
        chain.from_iterable(instance.projects[p].edits for p in scenario.active)
    )


def delay_from_scenarios(
    instance: Instance,
    scenarios: Iterable[tuple[Scenario, int]],
    base_stt: float,
    value: Callable[[Scenario], float],
) -> float:
    """Extrapolated sum of multiplicity * (stt - base) over the scenarios."""
    total = sum(mult * (value(scenario) - base_stt) for scenario, mult in scenarios)
    return instance.extrapolation * total


def ttd(instance: Instance, schedule: Schedule, cache: "ScenarioCache") -> float:
    """Total travel delay of the schedule from cached simulations."""

    def cached(scenario: Scenario) -> float:
        stt = cache.get(scenario)
        if stt is None:
            msg = f"scenario {scenario.bits(instance.n_projects)} missing from cache"
            raise DataError(msg)
        return stt

    return delay_from_scenarios(
        instance, scenarios_of(instance, schedule), cache.base_stt, cached
    )


def latest_schedule(instance: Instance) -> Schedule:
    """Every project at its latest admissible start."""
    return Schedule(tuple(p.latest_start for p in instance.projects))


def project_to_dict(project: Project) -> dict[str, Any]:
    return {
        "id": project.id,
        "d_p": project.duration,
        "c_p": project.cost,
        "w_p": project.failure_cost,
        "v_p": project.trial_prob,
        "k_p": project.allowed_successes,
        "l_p": project.hard_due,
        "edits": [
            {"link": e.link_id, "capacity": e.adjusted_capacity, "fft": e.adjusted_fft}
            for e in project.edits
        ],
    }


def project_from_dict(data: dict[str, Any]) -> Project:
    try:
        return Project(
            id=int(data["id"]),
            duration=int(data["d_p"]),
            cost=float(data["c_p"]),
            failure_cost=float(data["w_p"]),
            trial_prob=float(data["v_p"]),
            allowed_successes=int(data["k_p"]),
            hard_due=int(data["l_p"]),
            edits=tuple(
                ScenarioEdit(int(e["link"]), float(e["capacity"]), float(e["fft"]))
                for e in data.get("edits", [])
            ),
        )
    except (KeyError, TypeError, ValueError) as e:
        msg = f"invalid project entry: {e}"
        raise DataError(msg) from e


def instance_to_dict(instance: Instance) -> dict[str, Any]:
    return {
        "horizon": instance.horizon,
        "m": instance.max_simultaneous,
        # unlimited budgets are written as null
        "b_t": [None if math.isinf(b) else b for b in instance.budget],
        "extrapolation": instance.extrapolation,
        "network": instance.source,
        "projects": [project_to_dict(p) for p in instance.projects],
        "provenance": instance.provenance,
    }


def instance_from_dict(
    data: dict[str, Any], graph: Graph, demand: DemandMatrix
) -> Instance:
    try:
        return Instance(
            horizon=int(data["horizon"]),
            projects=tuple(project_from_dict(p) for p in data["projects"]),
            budget=tuple(math.inf if b is None else float(b) for b in data["b_t"]),
            max_simultaneous=int(data["m"]),
            graph=graph,
            demand=demand,
            extrapolation=float(data.get("extrapolation", 1.0)),
            source=dict(data.get("network", {})),
            provenance=dict(data.get("provenance", {})),
        )
    except (KeyError, TypeError, ValueError) as e:
        msg = f"invalid instance file: {e}"
        raise DataError(msg) from e
