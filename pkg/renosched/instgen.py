"""
Instance generation: one closure project per link, plus the sensitivity variants
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, replace
from enum import StrEnum
from importlib import resources
from pathlib import Path
from typing import Any, assert_never

import numpy as np

from .config import (
    ALLOWED_SUCCESSES_RANGE,
    COST_PER_PERIOD,
    DEFAULT_BUDGET_FACTOR,
    DEFAULT_DURATION_MEAN,
    DEFAULT_HORIZON,
    DEFAULT_MAX_SIMULTANEOUS,
    FAILURE_COST_RANGE,
    MAX_DURATION,
    MAX_REDRAWS,
    TRIAL_PROB_RANGE,
)
from .errors import DataError, InfeasibleError
from .network import (
    AddedLink,
    DemandMatrix,
    Graph,
    TopologyEdit,
    apply_topology,
    closure_edit,
    load_demand,
    load_graph,
    scale_capacity,
)
from .output import write_to_file
from .upper import (
    Instance,
    Project,
    Schedule,
    hard_deadline,
    instance_from_dict,
    instance_to_dict,
    repair,
)

logger = logging.getLogger(__name__)


class Topology(StrEnum):
    BASE = "base"
    LESS_CONNECTED = "less_connected"
    MORE_CONNECTED = "more_connected"


class VariantName(StrEnum):
    CAP09 = "cap09"
    CAP11 = "cap11"
    CAPMAX = "capmax"
    TIGHT = "tight"
    UNCONSTRAINED = "unconstrained"
    LESS_CONNECTED = "less_connected"
    MORE_CONNECTED = "more_connected"


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    horizon: int = DEFAULT_HORIZON
    duration_mean: float = DEFAULT_DURATION_MEAN
    budget_factor: float = DEFAULT_BUDGET_FACTOR
    max_simultaneous: int = DEFAULT_MAX_SIMULTANEOUS
    capacity_scale: float = 1.0
    demand_scale: float = 1.0
    topology: Topology = Topology.BASE
    unconstrained: bool = False
    tight: bool = False
    failure_cost_range: tuple[float, float] = FAILURE_COST_RANGE
    extrapolation: float = 1.0

    def __post_init__(self) -> None:
        if self.duration_mean <= 0 or self.budget_factor <= 0 or self.horizon < 1:
            msg = "duration mean and budget factor must be positive, horizon >= 1"
            raise ValueError(msg)
        if self.capacity_scale <= 0 or self.demand_scale < 0:
            msg = "capacity scale must be positive and demand scale non-negative"
            raise ValueError(msg)

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["topology"] = str(self.topology)
        data["failure_cost_range"] = list(self.failure_cost_range)
        return data


def variant(config: GenConfig, name: VariantName) -> GenConfig:
    """Config adjusted to one of the sensitivity-analysis presets."""
    match name:
        case VariantName.CAP09:
            return replace(config, capacity_scale=0.9, demand_scale=1.2)
        case VariantName.CAP11:
            return replace(config, capacity_scale=1.1, demand_scale=0.8)
        case VariantName.CAPMAX:
            return replace(config, capacity_scale=100.0, demand_scale=0.5)
        case VariantName.TIGHT:
            return replace(config, budget_factor=1.05, max_simultaneous=5, tight=True)
        case VariantName.UNCONSTRAINED:
            return replace(config, unconstrained=True)
        case VariantName.LESS_CONNECTED:
            return replace(config, topology=Topology.LESS_CONNECTED)
        case VariantName.MORE_CONNECTED:
            return replace(config, topology=Topology.MORE_CONNECTED)
        case _:
            assert_never(name)


def load_topology(topology: Topology) -> TopologyEdit:
    """Bundled link edit list; node pairs in the files are 1-based."""
    if topology is Topology.BASE:
        return TopologyEdit()
    resource = resources.files("renosched") / "data" / f"{topology}.json"
    try:
        data = json.loads(resource.read_text(encoding="utf-8"))
        return TopologyEdit(
            removed=tuple((int(t) - 1, int(h) - 1) for t, h in data["remove"]),
            added=tuple(
                AddedLink(
                    tail=int(link["tail"]) - 1,
                    head=int(link["head"]) - 1,
                    capacity=float(link["capacity"]),
                    free_flow_time=float(link["free_flow_time"]),
                    length=float(link.get("length", 0.0)),
                )
                for link in data["add"]
            ),
            capacity_scale=float(data.get("capacity_scale", 1.0)),
        )
    except (OSError, KeyError, TypeError, ValueError) as e:
        msg = f"invalid topology file for {topology}: {e}"
        raise DataError(msg) from e


def prepare_network(
    graph: Graph,
    demand: DemandMatrix,
    capacity_scale: float = 1.0,
    demand_scale: float = 1.0,
    topology: Topology = Topology.BASE,
) -> tuple[Graph, DemandMatrix]:
    """Apply the topology edit, then the capacity and demand scales."""
    if topology is not Topology.BASE:
        graph = apply_topology(graph, load_topology(topology))
    return scale_capacity(graph, capacity_scale), demand.scaled(demand_scale)


def _log_failure_model() -> None:
    logger.info(
        "🎲 Failure probability read as P(more than k_p successes within t periods)"
    )


def _draw_risk(
    rng: np.random.Generator, duration: int, horizon: int, project_id: int
) -> tuple[float, int, int]:
    for _ in range(MAX_REDRAWS):
        trial_prob = float(rng.uniform(*TRIAL_PROB_RANGE))
        allowed = int(
            rng.integers(ALLOWED_SUCCESSES_RANGE[0], ALLOWED_SUCCESSES_RANGE[1] + 1)
        )
        due = hard_deadline(trial_prob, allowed, horizon)
        if due - duration >= 0:
            return trial_prob, allowed, due
    msg = f"project {project_id}: no schedulable deadline after {MAX_REDRAWS} redraws"
    raise InfeasibleError(msg)


def generate(
    graph: Graph,
    demand: DemandMatrix,
    config: GenConfig,
    source: dict[str, Any] | None = None,
) -> Instance:
    """Random instance over the (possibly edited and rescaled) network."""
    graph, demand = prepare_network(
        graph, demand, config.capacity_scale, config.demand_scale, config.topology
    )
    rng = np.random.default_rng(config.seed)
    n = graph.n_links
    durations = np.clip(rng.poisson(config.duration_mean, size=n), 1, MAX_DURATION)
    costs = COST_PER_PERIOD * durations.astype(np.float64)
    risks = [
        _draw_risk(rng, int(d), config.horizon, p) for p, d in enumerate(durations)
    ]
    mean_cost = float(costs.mean()) if n else 0.0
    failure_costs = rng.uniform(*config.failure_cost_range, size=n) * mean_cost

    projects = tuple(
        Project(
            id=link.id,
            duration=int(durations[link.id]),
            cost=float(costs[link.id]),
            failure_cost=float(failure_costs[link.id]),
            trial_prob=risks[link.id][0],
            allowed_successes=risks[link.id][1],
            hard_due=risks[link.id][2],
            edits=(closure_edit(link),),
        )
        for link in graph.links
    )
    if config.unconstrained:
        budget = (float("inf"),) * config.horizon
        max_simultaneous = max(1, n)
    else:
        per_period = config.budget_factor * float(costs.sum()) / config.horizon
        budget = (per_period,) * config.horizon
        max_simultaneous = config.max_simultaneous

    instance = Instance(
        horizon=config.horizon,
        projects=projects,
        budget=budget,
        max_simultaneous=max_simultaneous,
        graph=graph,
        demand=demand,
        extrapolation=config.extrapolation,
        source={
            **(source or {}),
            "capacity_scale": config.capacity_scale,
            "demand_scale": config.demand_scale,
            "topology": str(config.topology),
        },
        provenance={**config.to_dict(), "work_sum": int(durations.sum())},
    )
    # all projects at period 0 must be repairable into a feasible schedule
    repair(instance, Schedule((0,) * n), np.random.default_rng(config.seed))
    _log_failure_model()
    logger.info(
        "✅ Generated %d projects over %d periods (work sum %d)",
        n,
        config.horizon,
        instance.work_sum,
    )
    return instance


def _relative(path: str, base: Path) -> str:
    try:
        return os.path.relpath(Path(path).resolve(), base.resolve())
    except ValueError:
        return str(Path(path).resolve())


def save_instance(instance: Instance, instance_file: Path) -> bool:
    """Write the instance JSON with network paths relative to its directory."""
    data = instance_to_dict(instance)
    network = dict(data["network"])
    for key in ("net", "trips"):
        if key in network:
            network[key] = _relative(network[key], instance_file.parent)
    data["network"] = network
    return write_to_file(
        json.dumps(data, indent=2, allow_nan=False) + "\n", instance_file
    )


def load_instance(instance_file: Path) -> Instance:
    """Read an instance and rebuild its network from the referenced TNTP files."""
    try:
        data = json.loads(instance_file.read_text(encoding="utf-8"))
        network = data["network"]
        net_file = instance_file.parent / network["net"]
        trips_file = instance_file.parent / network["trips"]
        topology = Topology(network.get("topology", Topology.BASE))
        capacity_scale = float(network.get("capacity_scale", 1.0))
        demand_scale = float(network.get("demand_scale", 1.0))
    except OSError as e:
        msg = f"Could not read {instance_file}: {e}"
        raise DataError(msg) from e
    except (KeyError, TypeError, ValueError) as e:
        msg = f"invalid instance file {instance_file}: {e}"
        raise DataError(msg) from e

    graph = load_graph(net_file)
    graph, demand = prepare_network(
        graph,
        load_demand(trips_file, graph),
        capacity_scale,
        demand_scale,
        topology,
    )
    data["network"] = {
        **network,
        "net": str(net_file),
        "trips": str(trips_file),
    }
    instance = instance_from_dict(data, graph, demand)
    if instance.n_projects and any(
        e.link_id >= graph.n_links for p in instance.projects for e in p.edits
    ):
        msg = f"{instance_file}: project edits reference unknown links"
        raise DataError(msg)
    _log_failure_model()
    logger.info(
        "📥 Loaded %d projects over %d periods from %s",
        instance.n_projects,
        instance.horizon,
        instance_file,
    )
    return instance
