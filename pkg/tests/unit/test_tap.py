import json

import numpy as np
import pytest

from renosched.errors import DataError
from renosched.network import (
    DemandMatrix,
    Graph,
    Link,
    apply_scenario,
    closure_edit,
    link_cost,
)
from renosched.tap import (
    all_or_nothing,
    beckmann_objective,
    line_search,
    shortest_path_tree,
    solve_ue,
    system_travel_time,
)
from tests.factories import make_demand, make_graph


def make_network(
    arcs: list[tuple[int, int, float]],
    n_nodes: int,
    capacity: float = 100.0,
    first_thru_node: int = 0,
) -> Graph:
    links = tuple(
        Link(id=i, tail=t, head=h, free_flow_time=fft, capacity=capacity)
        for i, (t, h, fft) in enumerate(arcs)
    )
    return Graph(n_nodes=n_nodes, links=links, first_thru_node=first_thru_node)


def test_shortest_path_single_link() -> None:
    graph = make_network([(0, 1, 10.0)], n_nodes=2)

    tree = shortest_path_tree(graph.base_view, graph.base_view.free_flow_time, 0)

    assert tree.distances[1] == 10.0
    assert tree.pred_link[1] == 0


def test_shortest_path_triangle() -> None:
    graph = make_network([(0, 1, 5.0), (1, 2, 5.0), (0, 2, 11.0)], n_nodes=3)

    tree = shortest_path_tree(graph.base_view, graph.base_view.free_flow_time, 0)

    assert tree.distances[2] == 10.0
    assert tree.path_links(2, graph.base_view) == [0, 1]


def test_shortest_path_ties_prefer_smaller_link_id() -> None:
    graph = make_network([(0, 1, 3.0), (0, 1, 3.0)], n_nodes=2)

    tree = shortest_path_tree(graph.base_view, graph.base_view.free_flow_time, 0)

    assert tree.pred_link[1] == 0


def test_shortest_path_does_not_route_through_zones() -> None:
    # node 1 is a zone: cheap route 0 -> 1 -> 3 is not allowed
    arcs = [(0, 1, 1.0), (1, 3, 1.0), (0, 2, 5.0), (2, 3, 5.0)]
    graph = make_network(arcs, n_nodes=4, first_thru_node=2)

    tree = shortest_path_tree(graph.base_view, graph.base_view.free_flow_time, 0)

    assert tree.distances[3] == 10.0
    assert tree.distances[1] == 1.0


def test_shortest_path_matches_bellman_ford() -> None:
    rng = np.random.default_rng(3)
    n_nodes = 50
    arcs = [
        (int(t), int(h), float(rng.uniform(1.0, 20.0)))
        for t, h in rng.integers(0, n_nodes, size=(300, 2))
        if t != h
    ]
    graph = make_network(arcs, n_nodes=n_nodes)
    costs = graph.base_view.free_flow_time

    tree = shortest_path_tree(graph.base_view, costs, 0)

    oracle = np.full(n_nodes, np.inf)
    oracle[0] = 0.0
    for _ in range(n_nodes):
        for link in graph.links:
            oracle[link.head] = min(
                oracle[link.head], oracle[link.tail] + link.free_flow_time
            )
    np.testing.assert_allclose(tree.distances, oracle)


def test_path_links_unreachable() -> None:
    graph = make_network([(0, 1, 1.0)], n_nodes=3)
    tree = shortest_path_tree(graph.base_view, graph.base_view.free_flow_time, 0)

    with pytest.raises(DataError, match="unreachable"):
        tree.path_links(2, graph.base_view)


def test_all_or_nothing_picks_cheaper_parallel_link() -> None:
    graph = make_network([(0, 1, 10.0), (0, 1, 12.0)], n_nodes=2)

    flows = all_or_nothing(
        graph.base_view, graph.base_view.free_flow_time, DemandMatrix({(0, 1): 100.0})
    )

    assert flows.tolist() == [100.0, 0.0]


def test_all_or_nothing_loads_full_path() -> None:
    graph = make_graph()

    view = graph.base_view
    flows = all_or_nothing(view, view.free_flow_time, make_demand())

    assert flows.tolist() == [20.0, 20.0, 0.0, 0.0]


def test_all_or_nothing_unreachable_pair() -> None:
    graph = make_network([(0, 1, 1.0)], n_nodes=3)

    with pytest.raises(DataError, match="unreachable"):
        all_or_nothing(
            graph.base_view, graph.base_view.free_flow_time, DemandMatrix({(0, 2): 1.0})
        )


def test_line_search_same_target() -> None:
    graph = make_network([(0, 1, 1.0), (0, 1, 1.0)], n_nodes=2)
    current = np.array([50.0, 0.0])

    assert line_search(graph.base_view, current, current.copy()) == 0.0


def test_line_search_symmetric_parallel_links() -> None:
    graph = make_network([(0, 1, 1.0), (0, 1, 1.0)], n_nodes=2, capacity=10.0)

    alpha = line_search(graph.base_view, np.array([20.0, 0.0]), np.array([0.0, 20.0]))

    assert alpha == pytest.approx(0.5, abs=1e-6)


def test_single_link_converges_in_one_iteration() -> None:
    graph = make_network([(0, 1, 10.0)], n_nodes=2)

    result = solve_ue(graph.base_view, DemandMatrix({(0, 1): 100.0}))

    assert result.flows.tolist() == [100.0]
    assert result.converged
    assert result.iterations == 1
    assert result.system_travel_time == pytest.approx(
        100.0 * link_cost(graph.links[0], 100.0)
    )


def test_symmetric_parallel_links_split_evenly() -> None:
    graph = make_network([(0, 1, 1.0), (0, 1, 1.0)], n_nodes=2, capacity=10.0)

    result = solve_ue(graph.base_view, DemandMatrix({(0, 1): 30.0}), tol=1e-8)

    np.testing.assert_allclose(result.flows, [15.0, 15.0], rtol=1e-3)
    half_cost = link_cost(graph.links[0], 15.0)
    assert result.system_travel_time == pytest.approx(2 * 15.0 * half_cost, rel=1e-4)


def test_two_route_equilibrium_equalizes_route_costs() -> None:
    graph = make_graph()
    tol = 1e-6

    result = solve_ue(graph.base_view, make_demand(), tol=tol)

    assert result.converged
    assert result.relative_gap <= tol
    flows = result.flows
    assert flows[0] == pytest.approx(flows[1])
    assert flows[2] == pytest.approx(flows[3])
    assert flows[0] + flows[2] == pytest.approx(20.0)
    costs = result.link_costs
    fast, slow = costs[0] + costs[1], costs[2] + costs[3]
    assert abs(fast - slow) <= 1e-4 * min(fast, slow)


def test_zero_demand_has_zero_travel_time() -> None:
    result = solve_ue(make_graph().base_view, DemandMatrix())

    assert result.system_travel_time == 0.0
    assert result.relative_gap == 0.0


def test_closure_diverts_all_flow() -> None:
    graph = make_graph()
    view = apply_scenario(graph, [closure_edit(graph.links[0])])

    result = solve_ue(view, make_demand())

    assert result.flows[0] == pytest.approx(0.0, abs=1e-9)
    assert result.flows[2] == pytest.approx(20.0)


def test_closure_never_decreases_system_travel_time() -> None:
    graph = make_graph()
    base = solve_ue(graph.base_view, make_demand())

    closed = solve_ue(
        apply_scenario(graph, [closure_edit(graph.links[2])]), make_demand()
    )

    assert closed.system_travel_time >= base.system_travel_time


def test_beckmann_is_reported_at_final_flows() -> None:
    graph = make_graph()

    result = solve_ue(graph.base_view, make_demand())

    assert result.beckmann == pytest.approx(
        beckmann_objective(graph.base_view, result.flows)
    )
    assert system_travel_time(result) == pytest.approx(result.system_travel_time)


def test_iteration_cap_reports_non_convergence(
    caplog: pytest.LogCaptureFixture,
) -> None:
    result = solve_ue(make_graph().base_view, make_demand(), tol=1e-12, max_iters=1)

    assert not result.converged
    assert result.iterations == 1
    assert result.relative_gap >= 0.0
    assert "Frank-Wolfe stopped" in caplog.text


@pytest.mark.parametrize(("tol", "max_iters"), [(0.0, 10), (1e-4, 0)])
def test_solve_ue_rejects_bad_settings(tol: float, max_iters: int) -> None:
    with pytest.raises(ValueError, match="tol"):
        solve_ue(make_graph().base_view, make_demand(), tol=tol, max_iters=max_iters)


def test_result_serialization() -> None:
    result = solve_ue(make_graph().base_view, make_demand())

    lines = result.to_csv().splitlines()
    summary = json.loads(result.sidecar_json())

    assert lines[0] == "link_id,flow,cost"
    assert len(lines) == 5
    assert lines[1].startswith("0,")
    assert set(summary) == {
        "gap",
        "iterations",
        "stt",
        "converged",
        "flow_change",
        "beckmann",
    }
    assert summary["stt"] == result.system_travel_time


def grid_network(fft_scale: float = 1.0) -> Graph:
    """Three by three grid with links both ways and uneven free-flow times."""
    arcs: list[tuple[int, int, float]] = []
    for node in range(9):
        row, col = divmod(node, 3)
        neighbours = [node + 1] if col < 2 else []
        neighbours += [node + 3] if row < 2 else []
        for other in neighbours:
            fft = 1.0 + (node * 7 + other * 3) % 5 / 2.0
            arcs += [(node, other, fft_scale * fft), (other, node, fft_scale * fft)]
    return make_network(arcs, n_nodes=9, capacity=100.0)


GRID_DEMAND = DemandMatrix(
    {(0, 8): 400.0, (2, 6): 250.0, (8, 0): 150.0, (6, 2): 100.0}
)


def test_beckmann_never_increases_across_iterations() -> None:
    result = solve_ue(grid_network().base_view, GRID_DEMAND, tol=1e-6)

    history = np.array(result.beckmann_history)
    assert len(history) == result.iterations > 2
    assert np.all(np.diff(history) <= 1e-9 * history[:-1])
    assert all(gap >= 0.0 for gap in result.gap_history)
    assert min(result.gap_history) == result.relative_gap


def test_solve_ue_is_deterministic() -> None:
    view = grid_network().base_view

    first = solve_ue(view, GRID_DEMAND)
    second = solve_ue(view, GRID_DEMAND)

    assert first.flows.tobytes() == second.flows.tobytes()
    assert first.system_travel_time == second.system_travel_time
    assert first.gap_history == second.gap_history


@pytest.mark.parametrize("factor", [0.5, 2.0, 4.0])
def test_flows_do_not_depend_on_free_flow_time_scale(factor: float) -> None:
    base = solve_ue(grid_network().base_view, GRID_DEMAND)

    scaled = solve_ue(grid_network(factor).base_view, GRID_DEMAND)

    np.testing.assert_allclose(scaled.flows, base.flows, rtol=1e-9, atol=1e-9)
    assert scaled.system_travel_time == pytest.approx(
        factor * base.system_travel_time, rel=1e-9
    )
