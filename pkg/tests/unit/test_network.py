import math

import numpy as np
import pytest

from renosched.errors import DataError, ParseError
from renosched.network import (
    AddedLink,
    DemandMatrix,
    Graph,
    Link,
    ScenarioEdit,
    TopologyEdit,
    apply_scenario,
    apply_topology,
    closure_edit,
    format_tntp_net,
    format_tntp_trips,
    link_cost,
    link_cost_integral,
    merge_edits,
    parse_tntp_net,
    parse_tntp_trips,
    scale_capacity,
)
from tests.factories import make_demand, make_graph

SINGLE_LINK_NET = """<NUMBER OF ZONES> 2
<NUMBER OF NODES> 2
<FIRST THRU NODE> 1
<NUMBER OF LINKS> 1
<END OF METADATA>

~ init term capacity length fft b power speed toll type ;
1 2 100 1 10 0.15 4 0 0 1 ;
"""


def make_link(
    fft: float = 10.0, capacity: float = 100.0, bpr_a: float = 0.15
) -> Link:
    return Link(
        id=0, tail=0, head=1, free_flow_time=fft, capacity=capacity, bpr_a=bpr_a
    )


def test_parse_minimal_network() -> None:
    graph = parse_tntp_net(SINGLE_LINK_NET)

    assert graph.n_nodes == 2
    assert graph.n_links == 1
    link = graph.links[0]
    assert (link.tail, link.head) == (0, 1)
    assert link.free_flow_time == 10.0
    assert link.capacity == 100.0
    assert graph.first_thru_node == 0


def test_parse_network_link_count_mismatch() -> None:
    text = SINGLE_LINK_NET.replace("<NUMBER OF LINKS> 1", "<NUMBER OF LINKS> 2")

    with pytest.raises(ParseError, match="link count mismatch"):
        parse_tntp_net(text)


def test_parse_network_missing_end_of_metadata() -> None:
    text = SINGLE_LINK_NET.replace("<END OF METADATA>\n", "")

    with pytest.raises(ParseError, match="malformed header"):
        parse_tntp_net(text)


@pytest.mark.parametrize(
    ("row", "message"),
    [
        ("1 2 0 1 10 0.15 4 0 0 1 ;", "non-positive capacity"),
        ("1 2 100 1 0 0.15 4 0 0 1 ;", "non-positive free-flow time"),
        ("1 2 100 1 10 ;", "expected at least 7 columns"),
        ("1 3 100 1 10 0.15 4 0 0 1 ;", "node count mismatch"),
        ("1 x 100 1 10 0.15 4 0 0 1 ;", "non-numeric"),
    ],
)
def test_parse_network_rejects_bad_rows(row: str, message: str) -> None:
    text = SINGLE_LINK_NET.replace("1 2 100 1 10 0.15 4 0 0 1 ;", row)

    with pytest.raises(ParseError, match=message) as excinfo:
        parse_tntp_net(text)

    assert excinfo.value.line == 8
    assert "line 8" in str(excinfo.value)


def test_parse_network_first_thru_node_is_zero_based() -> None:
    text = SINGLE_LINK_NET.replace("<FIRST THRU NODE> 1", "<FIRST THRU NODE> 2")

    assert parse_tntp_net(text).first_thru_node == 1


def test_parse_trips_single_entry() -> None:
    demand = parse_tntp_trips("Origin 1\n    2 : 300.0;\n")

    assert dict(demand.entries) == {(0, 1): 300.0}


def test_parse_trips_empty_section() -> None:
    text = "<NUMBER OF ZONES> 3\n<TOTAL OD FLOW> 0.0\n<END OF METADATA>\n\n"

    demand = parse_tntp_trips(text)

    assert len(demand) == 0
    assert demand.total == 0.0


def test_parse_trips_omits_zero_and_diagonal() -> None:
    text = "Origin 1\n 1 : 5.0; 2 : 0.0; 3 : 7.5;\nOrigin 2\n 1 : 2.0;\n"

    demand = parse_tntp_trips(text, n_nodes=3)

    assert dict(demand.entries) == {(0, 2): 7.5, (1, 0): 2.0}


@pytest.mark.parametrize(
    ("text", "message"),
    [
        ("Origin 1\n 4 : 1.0;\n", "unknown node 4"),
        ("Origin 9\n 1 : 1.0;\n", "unknown node 9"),
        ("1 : 1.0;\n", "outside an Origin block"),
        ("Origin 1\n 2 : -1.0;\n", "negative demand"),
    ],
)
def test_parse_trips_rejects_bad_entries(text: str, message: str) -> None:
    with pytest.raises(ParseError, match=message):
        parse_tntp_trips(text, n_nodes=3)


def test_parse_trips_warns_on_declared_total_mismatch(
    caplog: pytest.LogCaptureFixture,
) -> None:
    text = "<NUMBER OF ZONES> 2\n<TOTAL OD FLOW> 99.0\n<END OF METADATA>\n"
    text += "Origin 1\n 2 : 10.0;\n"

    demand = parse_tntp_trips(text)

    assert demand.total == 10.0
    assert "differs from parsed total" in caplog.text


def test_format_and_parse_preserve_network_and_demand() -> None:
    graph = make_graph()
    demand = make_demand()

    assert parse_tntp_net(format_tntp_net(graph)) == graph
    assert parse_tntp_trips(format_tntp_trips(demand, graph.n_nodes)) == demand


@pytest.mark.parametrize(
    ("flow", "expected_factor"),
    [(0.0, 1.0), (100.0, 1.15), (200.0, 3.4)],
)
def test_link_cost_bpr(flow: float, expected_factor: float) -> None:
    assert link_cost(make_link(), flow) == pytest.approx(10.0 * expected_factor)


def test_link_cost_overrides() -> None:
    link = make_link()

    assert link_cost(link, 100.0, capacity_override=200.0) == pytest.approx(
        10.0 * (1 + 0.15 / 16)
    )
    assert link_cost(link, 0.0, fft_override=25.0) == 25.0


def test_link_cost_integral_values() -> None:
    link = make_link()

    assert link_cost_integral(link, 0.0) == 0.0
    assert link_cost_integral(link, 100.0) == pytest.approx(1.03 * 10.0 * 100.0)
    assert link_cost_integral(make_link(bpr_a=0.0), 37.0) == pytest.approx(370.0)


def test_link_cost_integral_derivative_is_link_cost() -> None:
    rng = np.random.default_rng(7)
    for _ in range(100):
        link = make_link(
            fft=float(rng.uniform(0.5, 20.0)), capacity=float(rng.uniform(10, 5000))
        )
        flow = float(rng.uniform(1.0, 2.0 * link.capacity))
        h = flow * 1e-6
        upper = link_cost_integral(link, flow + h)
        numeric = (upper - link_cost_integral(link, flow - h)) / (2 * h)
        assert numeric == pytest.approx(link_cost(link, flow), rel=1e-6)


def test_view_costs_match_scalar_costs() -> None:
    graph = make_graph()
    flows = np.array([3.0, 8.0, 12.0, 0.0])

    costs = graph.base_view.link_costs(flows)
    integrals = graph.base_view.link_cost_integrals(flows)

    for link, flow, cost, integral in zip(
        graph.links, flows, costs, integrals, strict=True
    ):
        assert cost == pytest.approx(link_cost(link, float(flow)))
        assert integral == pytest.approx(link_cost_integral(link, float(flow)))


def test_apply_scenario_empty_is_base_view() -> None:
    graph = make_graph()

    assert apply_scenario(graph, []) is graph.base_view


def test_apply_scenario_changes_only_edited_links() -> None:
    graph = make_graph()
    edits = [ScenarioEdit(1, 5.0, 3.0), ScenarioEdit(3, 2.0, 2.5)]

    view = apply_scenario(graph, edits)

    assert view.capacity.tolist() == [10.0, 5.0, 10.0, 2.0]
    assert view.free_flow_time.tolist() == [1.0, 3.0, 2.0, 2.5]
    assert graph.base_view.capacity.tolist() == [10.0, 10.0, 10.0, 10.0]


def test_closure_edit_makes_link_prohibitive() -> None:
    graph = make_graph()
    view = apply_scenario(graph, [closure_edit(graph.links[0])])

    costs = view.link_costs(np.full(graph.n_links, 1.0))

    assert costs[0] > 1e6 * graph.links[0].free_flow_time
    assert math.isfinite(costs[0])


@pytest.mark.parametrize(
    ("edits", "message"),
    [
        ([ScenarioEdit(9, 1.0, 1.0)], "unknown link 9"),
        ([ScenarioEdit(0, 1.0, 1.0), ScenarioEdit(0, 2.0, 2.0)], "duplicate"),
        ([ScenarioEdit(0, 0.0, 1.0)], "capacity"),
        ([ScenarioEdit(0, 1.0, 0.5)], "below the base"),
    ],
)
def test_apply_scenario_rejects_bad_edits(
    edits: list[ScenarioEdit], message: str
) -> None:
    with pytest.raises(DataError, match=message):
        apply_scenario(make_graph(), edits)


def test_merge_edits_keeps_most_restrictive() -> None:
    merged = merge_edits(
        [
            ScenarioEdit(2, 5.0, 2.0),
            ScenarioEdit(0, 3.0, 1.0),
            ScenarioEdit(2, 7.0, 4.0),
        ]
    )

    assert merged == [ScenarioEdit(0, 3.0, 1.0), ScenarioEdit(2, 5.0, 4.0)]


def test_scale_capacity() -> None:
    graph = make_graph()

    scaled = scale_capacity(graph, 0.9)

    assert scale_capacity(graph, 1.0) is graph
    assert [ln.capacity for ln in scaled.links] == pytest.approx([9.0] * 4)
    assert [ln.free_flow_time for ln in scaled.links] == [
        ln.free_flow_time for ln in graph.links
    ]


def test_demand_scaled() -> None:
    demand = DemandMatrix({(0, 3): 20.0, (1, 2): 5.0})

    assert demand.scaled(1.2).total == pytest.approx(30.0)


def test_demand_rejects_self_loops() -> None:
    with pytest.raises(DataError, match="self-loop"):
        DemandMatrix({(1, 1): 5.0})


def test_graph_requires_dense_link_ids() -> None:
    link = Link(id=3, tail=0, head=1, free_flow_time=1.0, capacity=1.0)

    with pytest.raises(DataError, match="dense"):
        Graph(n_nodes=2, links=(link,))


def test_apply_topology_removes_and_adds_links() -> None:
    graph = make_graph()
    edit = TopologyEdit(
        removed=((0, 2),),
        added=(AddedLink(tail=2, head=1, capacity=6.0, free_flow_time=0.5),),
        capacity_scale=2.0,
    )

    edited = apply_topology(graph, edit)

    assert edited.n_links == 4
    assert [ln.id for ln in edited.links] == [0, 1, 2, 3]
    pairs = [(ln.tail, ln.head) for ln in edited.links]
    assert pairs == [(0, 1), (1, 3), (2, 3), (2, 1)]
    assert edited.links[3].capacity == 12.0
    assert edited.links[0].capacity == 20.0


def test_apply_topology_unknown_pair() -> None:
    with pytest.raises(DataError, match="no link from node 4 to node 1"):
        apply_topology(make_graph(), TopologyEdit(removed=((3, 0),)))


def test_link_cost_strictly_increasing_in_flow() -> None:
    rng = np.random.default_rng(3)
    for _ in range(50):
        capacity = float(rng.uniform(10.0, 5000.0))
        link = make_link(fft=float(rng.uniform(0.5, 20.0)), capacity=capacity)
        flows = np.linspace(0.0, 3.0 * capacity, 200)

        costs = np.array([link_cost(link, float(f)) for f in flows])

        assert np.all(np.diff(costs) > 0)


def test_reverting_a_scenario_restores_the_base_bitwise() -> None:
    graph = make_graph()
    base = graph.base_view
    before = [
        base.capacity.tobytes(),
        base.free_flow_time.tobytes(),
        base.bpr_a.tobytes(),
        base.bpr_b.tobytes(),
    ]

    edited = apply_scenario(
        graph, [closure_edit(graph.links[0]), ScenarioEdit(2, 5.0, 2.0)]
    )
    reverted = apply_scenario(graph, [])

    assert edited.capacity.tobytes() != before[0]
    assert [
        reverted.capacity.tobytes(),
        reverted.free_flow_time.tobytes(),
        reverted.bpr_a.tobytes(),
        reverted.bpr_b.tobytes(),
    ] == before
    assert graph == make_graph()
