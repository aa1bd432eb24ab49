"""
User-equilibrium traffic assignment with the Frank-Wolfe algorithm
"""

import heapq
import json
import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .config import (
    DEFAULT_TAP_MAX_ITERS,
    DEFAULT_TAP_TOLERANCE,
    LINE_SEARCH_MAX_ITERS,
    LINE_SEARCH_TOLERANCE,
)
from .errors import DataError
from .network import DemandMatrix, FloatArray, GraphView

logger = logging.getLogger(__name__)

# Aggregate link flows in vehicles/hour, indexed by link id
FlowPattern = FloatArray

NO_LINK = -1


@dataclass(frozen=True, eq=False)
class ShortestPathTree:
    origin: int
    distances: FloatArray
    pred_link: NDArray[np.int64]

    def path_links(self, destination: int, view: GraphView) -> list[int]:
        """Link ids from origin to destination."""
        links: list[int] = []
        node = destination
        while node != self.origin:
            link_id = int(self.pred_link[node])
            if link_id == NO_LINK:
                msg = f"node {destination + 1} unreachable from {self.origin + 1}"
                raise DataError(msg)
            links.append(link_id)
            node = view.graph.links[link_id].tail
        links.reverse()
        return links


@dataclass(frozen=True, eq=False)
class TapResult:
    flows: FlowPattern
    link_costs: FloatArray
    system_travel_time: float
    relative_gap: float
    iterations: int
    converged: bool
    flow_change: float = 0.0
    beckmann: float = 0.0
    # per iteration, measured at the flows the iteration started from
    gap_history: tuple[float, ...] = ()
    beckmann_history: tuple[float, ...] = ()

    def to_csv(self) -> str:
        rows = ["link_id,flow,cost"]
        rows.extend(
            f"{link_id},{flow!r},{cost!r}"
            for link_id, (flow, cost) in enumerate(
                zip(self.flows.tolist(), self.link_costs.tolist(), strict=True)
            )
        )
        return "\n".join(rows) + "\n"

    def sidecar_json(self) -> str:
        return json.dumps(
            {
                "gap": self.relative_gap,
                "iterations": self.iterations,
                "stt": self.system_travel_time,
                "converged": self.converged,
                "flow_change": self.flow_change,
                "beckmann": self.beckmann,
            },
            indent=2,
        )


def shortest_path_tree(
    view: GraphView, costs: FloatArray, origin: int
) -> ShortestPathTree:
    """Dijkstra from origin; ties go to the smaller predecessor link id."""
    graph = view.graph
    distances = np.full(graph.n_nodes, math.inf)
    pred_link = np.full(graph.n_nodes, NO_LINK, dtype=np.int64)
    dist = distances.tolist()
    pred = pred_link.tolist()
    cost_list = costs.tolist()
    links = graph.links
    out_links = graph.out_links

    dist[origin] = 0.0
    settled = [False] * graph.n_nodes
    fringe: list[tuple[float, int]] = [(0.0, origin)]
    while fringe:
        d, node = heapq.heappop(fringe)
        if settled[node]:
            continue
        settled[node] = True
        # zones below the first through node only originate or absorb trips
        if node != origin and node < graph.first_thru_node:
            continue
        for link_id in out_links[node]:
            head = links[link_id].head
            candidate = d + cost_list[link_id]
            if candidate < dist[head]:
                dist[head] = candidate
                pred[head] = link_id
                heapq.heappush(fringe, (candidate, head))
            elif candidate == dist[head] and link_id < pred[head]:
                pred[head] = link_id

    return ShortestPathTree(
        origin=origin,
        distances=np.array(dist, dtype=np.float64),
        pred_link=np.array(pred, dtype=np.int64),
    )


def all_or_nothing(
    view: GraphView, costs: FloatArray, demand: DemandMatrix
) -> FlowPattern:
    """Load every OD demand onto its current shortest path."""
    graph = view.graph
    flows = np.zeros(graph.n_links, dtype=np.float64)
    for origin, destinations in demand.by_origin().items():
        tree = shortest_path_tree(view, costs, origin)
        pred = tree.pred_link.tolist()
        for destination, volume in destinations:
            if pred[destination] == NO_LINK:
                msg = (
                    f"OD pair ({origin + 1}, {destination + 1}) is unreachable"
                )
                raise DataError(msg)
            node = destination
            while node != origin:
                link_id = pred[node]
                flows[link_id] += volume
                node = graph.links[link_id].tail
    return flows


def line_search(
    view: GraphView, current: FlowPattern, target: FlowPattern
) -> float:
    """Step size minimizing the Beckmann objective on the segment, by bisection."""
    direction = target - current
    if not np.any(direction):
        return 0.0

    def derivative(alpha: float) -> float:
        return float(np.dot(direction, view.link_costs(current + alpha * direction)))

    if derivative(0.0) >= 0:
        return 0.0
    if derivative(1.0) <= 0:
        return 1.0

    low, high = 0.0, 1.0
    mid = 0.5
    for _ in range(LINE_SEARCH_MAX_ITERS):
        mid = 0.5 * (low + high)
        slope = derivative(mid)
        if abs(slope) <= LINE_SEARCH_TOLERANCE:
            break
        if slope > 0:
            high = mid
        else:
            low = mid
    return mid


def beckmann_objective(view: GraphView, flows: FlowPattern) -> float:
    return float(view.link_cost_integrals(flows).sum())


def system_travel_time(result: TapResult) -> float:
    """Flow-weighted total travel time in vehicle-minutes."""
    return float(np.dot(result.flows, result.link_costs))


def _relative_gap(total_cost: float, shortest_cost: float) -> float:
    if total_cost <= 0:
        return 0.0
    return max(0.0, (total_cost - shortest_cost) / total_cost)


def solve_ue(
    view: GraphView,
    demand: DemandMatrix,
    tol: float = DEFAULT_TAP_TOLERANCE,
    max_iters: int = DEFAULT_TAP_MAX_ITERS,
) -> TapResult:
    """Frank-Wolfe user equilibrium, stopping on the relative gap."""
    if tol <= 0 or max_iters < 1:
        msg = "solve_ue needs tol > 0 and max_iters >= 1"
        raise ValueError(msg)

    flows = all_or_nothing(view, view.free_flow_time, demand)
    best: tuple[float, FlowPattern] | None = None
    flow_change = 0.0
    iterations = 0
    converged = False
    gaps: list[float] = []
    beckmanns: list[float] = []

    while iterations < max_iters:
        iterations += 1
        costs = view.link_costs(flows)
        target = all_or_nothing(view, costs, demand)
        gap = _relative_gap(float(np.dot(flows, costs)), float(np.dot(target, costs)))
        gaps.append(gap)
        beckmanns.append(beckmann_objective(view, flows))
        if best is None or gap < best[0]:
            best = (gap, flows)
        if gap <= tol:
            converged = True
            break
        alpha = line_search(view, flows, target)
        if alpha == 0.0:
            break
        updated = flows + alpha * (target - flows)
        flow_change = float(np.linalg.norm(updated - flows))
        flows = updated

    assert best is not None
    gap, flows = best
    if not converged:
        logger.warning(
            "⚠️  Frank-Wolfe stopped after %d iterations at relative gap %.2e",
            iterations,
            gap,
        )
    link_costs = view.link_costs(flows)
    return TapResult(
        flows=flows,
        link_costs=link_costs,
        system_travel_time=float(np.dot(flows, link_costs)),
        relative_gap=gap,
        iterations=iterations,
        converged=converged,
        flow_change=flow_change,
        beckmann=beckmann_objective(view, flows),
        gap_history=tuple(gaps),
        beckmann_history=tuple(beckmanns),
    )
