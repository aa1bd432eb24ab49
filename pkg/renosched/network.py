"""
Road network model, TNTP ingestion and BPR link costing
"""

import io
import logging
import re
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import TextIO

import numpy as np
from numpy.typing import NDArray

from .config import (
    CLOSURE_CAPACITY_FACTOR,
    CLOSURE_FFT_FACTOR,
    DEFAULT_BPR_A,
    DEFAULT_BPR_B,
)
from .errors import DataError, ParseError

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

_METADATA_RE = re.compile(r"^<([^>]+)>\s*(.*)$")
_ORIGIN_RE = re.compile(r"^Origin\s+(\d+)\s*$", re.IGNORECASE)
_TRIP_ENTRY_RE = re.compile(r"(\d+)\s*:\s*([-+0-9.eE]+)\s*;?")
_END_OF_METADATA = "END OF METADATA"
_MIN_NET_COLUMNS = 7


@dataclass(frozen=True)
class Link:
    """Directed road segment with BPR parameters. Node ids are 0-based."""

    id: int
    tail: int
    head: int
    free_flow_time: float
    capacity: float
    bpr_a: float = DEFAULT_BPR_A
    bpr_b: float = DEFAULT_BPR_B
    length: float = 0.0

    def __post_init__(self) -> None:
        if self.free_flow_time <= 0:
            msg = f"link {self.id}: free-flow time must be positive"
            raise DataError(msg)
        if self.capacity <= 0:
            msg = f"link {self.id}: capacity must be positive"
            raise DataError(msg)
        if self.bpr_a < 0 or self.bpr_b < 1:
            msg = f"link {self.id}: BPR parameters need a >= 0 and b >= 1"
            raise DataError(msg)


@dataclass(frozen=True)
class Graph:
    """Directed road network with links indexed densely by id."""

    n_nodes: int
    links: tuple[Link, ...]
    first_thru_node: int = 0

    def __post_init__(self) -> None:
        for index, link in enumerate(self.links):
            if link.id != index:
                msg = f"link ids must be dense from 0, found {link.id} at {index}"
                raise DataError(msg)
            if not (0 <= link.tail < self.n_nodes and 0 <= link.head < self.n_nodes):
                msg = f"link {link.id} references a node outside the graph"
                raise DataError(msg)

    @property
    def n_links(self) -> int:
        return len(self.links)

    @cached_property
    def out_links(self) -> tuple[tuple[int, ...], ...]:
        """Outgoing link ids per node, ascending."""
        adjacency: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for link in self.links:
            adjacency[link.tail].append(link.id)
        return tuple(tuple(ids) for ids in adjacency)

    @cached_property
    def base_view(self) -> "GraphView":
        return GraphView.from_graph(self)

    def find_link(self, tail: int, head: int) -> Link:
        """First link from tail to head."""
        for link_id in self.out_links[tail]:
            if self.links[link_id].head == head:
                return self.links[link_id]
        msg = f"no link from node {tail + 1} to node {head + 1}"
        raise DataError(msg)


@dataclass(frozen=True)
class DemandMatrix:
    """Peak-hour OD demand in vehicles/hour, keyed by 0-based (origin, destination)."""

    entries: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for (origin, destination), demand in self.entries.items():
            if origin == destination:
                msg = f"OD pair ({origin + 1}, {destination + 1}) is a self-loop"
                raise DataError(msg)
            if demand < 0:
                msg = f"OD pair ({origin + 1}, {destination + 1}) has negative demand"
                raise DataError(msg)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def total(self) -> float:
        return float(sum(self.entries.values()))

    def by_origin(self) -> dict[int, list[tuple[int, float]]]:
        """Destinations and demands per origin, both in ascending node order."""
        grouped: dict[int, list[tuple[int, float]]] = {}
        for origin, destination in sorted(self.entries):
            grouped.setdefault(origin, []).append(
                (destination, self.entries[(origin, destination)])
            )
        return grouped

    def scaled(self, factor: float) -> "DemandMatrix":
        return DemandMatrix({pair: d * factor for pair, d in self.entries.items()})


@dataclass(frozen=True)
class ScenarioEdit:
    """Adjusted capacity and free-flow time of one link while a project is active."""

    link_id: int
    adjusted_capacity: float
    adjusted_fft: float


@dataclass(frozen=True, eq=False)
class GraphView:
    """Costing view of a graph: per-link BPR parameters as arrays."""

    graph: Graph
    capacity: FloatArray
    free_flow_time: FloatArray
    bpr_a: FloatArray
    bpr_b: FloatArray

    @classmethod
    def from_graph(cls, graph: Graph) -> "GraphView":
        def frozen(values: Iterable[float]) -> FloatArray:
            array = np.fromiter(values, dtype=np.float64, count=graph.n_links)
            array.setflags(write=False)
            return array

        return cls(
            graph=graph,
            capacity=frozen(link.capacity for link in graph.links),
            free_flow_time=frozen(link.free_flow_time for link in graph.links),
            bpr_a=frozen(link.bpr_a for link in graph.links),
            bpr_b=frozen(link.bpr_b for link in graph.links),
        )

    def link_costs(self, flows: FloatArray) -> FloatArray:
        """BPR travel time of every link at the given flows."""
        return self.free_flow_time * (
            1.0 + self.bpr_a * np.power(flows / self.capacity, self.bpr_b)
        )

    def link_cost_integrals(self, flows: FloatArray) -> FloatArray:
        """Closed-form integral of the BPR function from 0 to each link flow."""
        return (
            self.free_flow_time
            * flows
            * (
                1.0
                + (self.bpr_a / (self.bpr_b + 1.0))
                * np.power(flows / self.capacity, self.bpr_b)
            )
        )


def link_cost(
    link: Link,
    flow: float,
    capacity_override: float | None = None,
    fft_override: float | None = None,
) -> float:
    """BPR travel time r * (1 + a * (flow / capacity) ** b) in minutes."""
    capacity = link.capacity if capacity_override is None else capacity_override
    fft = link.free_flow_time if fft_override is None else fft_override
    return fft * (1.0 + link.bpr_a * (flow / capacity) ** link.bpr_b)


def link_cost_integral(link: Link, flow: float) -> float:
    """Integral of the BPR function from 0 to flow, in vehicle-minutes."""
    ratio = (flow / link.capacity) ** link.bpr_b
    return link.free_flow_time * flow * (1.0 + link.bpr_a / (link.bpr_b + 1.0) * ratio)


def closure_edit(link: Link) -> ScenarioEdit:
    """Edit modelling a full closure of the link."""
    return ScenarioEdit(
        link_id=link.id,
        adjusted_capacity=link.capacity * CLOSURE_CAPACITY_FACTOR,
        adjusted_fft=link.free_flow_time * CLOSURE_FFT_FACTOR,
    )


def merge_edits(edits: Iterable[ScenarioEdit]) -> list[ScenarioEdit]:
    """One edit per link: the smallest capacity and the largest free-flow time win."""
    merged: dict[int, ScenarioEdit] = {}
    for edit in edits:
        previous = merged.get(edit.link_id)
        if previous is None:
            merged[edit.link_id] = edit
            continue
        merged[edit.link_id] = ScenarioEdit(
            link_id=edit.link_id,
            adjusted_capacity=min(previous.adjusted_capacity, edit.adjusted_capacity),
            adjusted_fft=max(previous.adjusted_fft, edit.adjusted_fft),
        )
    return [merged[link_id] for link_id in sorted(merged)]


def apply_scenario(graph: Graph, edits: Sequence[ScenarioEdit]) -> GraphView:
    """View of the graph where edited links use their adjusted parameters."""
    if not edits:
        return graph.base_view

    capacity = graph.base_view.capacity.copy()
    fft = graph.base_view.free_flow_time.copy()
    seen: set[int] = set()
    for edit in edits:
        if not 0 <= edit.link_id < graph.n_links:
            msg = f"scenario edit references unknown link {edit.link_id}"
            raise DataError(msg)
        if edit.link_id in seen:
            msg = f"duplicate scenario edit for link {edit.link_id}"
            raise DataError(msg)
        link = graph.links[edit.link_id]
        if edit.adjusted_capacity <= 0:
            msg = f"adjusted capacity of link {edit.link_id} must be positive"
            raise DataError(msg)
        if edit.adjusted_fft < link.free_flow_time:
            msg = f"adjusted free-flow time of link {edit.link_id} is below the base"
            raise DataError(msg)
        seen.add(edit.link_id)
        capacity[edit.link_id] = edit.adjusted_capacity
        fft[edit.link_id] = edit.adjusted_fft

    capacity.setflags(write=False)
    fft.setflags(write=False)
    return GraphView(
        graph=graph,
        capacity=capacity,
        free_flow_time=fft,
        bpr_a=graph.base_view.bpr_a,
        bpr_b=graph.base_view.bpr_b,
    )


def scale_capacity(graph: Graph, factor: float) -> Graph:
    """Copy of the graph with every capacity multiplied by factor."""
    if factor == 1.0:
        return graph
    links = tuple(replace(ln, capacity=ln.capacity * factor) for ln in graph.links)
    return Graph(graph.n_nodes, links, graph.first_thru_node)


def rebuild_links(
    graph: Graph, removed: Iterable[int], added: Iterable[Link]
) -> Graph:
    """Drop links by id and append new ones, re-densifying ids in stable order."""
    removed_ids = set(removed)
    kept = [link for link in graph.links if link.id not in removed_ids]
    links = tuple(
        replace(link, id=index) for index, link in enumerate([*kept, *added])
    )
    return Graph(graph.n_nodes, links, graph.first_thru_node)


@dataclass(frozen=True)
class AddedLink:
    tail: int
    head: int
    capacity: float
    free_flow_time: float
    length: float = 0.0


@dataclass(frozen=True)
class TopologyEdit:
    """Links removed and added by node pair (0-based), plus a capacity rescale."""

    removed: tuple[tuple[int, int], ...] = ()
    added: tuple[AddedLink, ...] = ()
    capacity_scale: float = 1.0


def apply_topology(graph: Graph, edit: TopologyEdit) -> Graph:
    removed = [graph.find_link(tail, head).id for tail, head in edit.removed]
    added = [
        Link(
            id=graph.n_links + index,
            tail=new.tail,
            head=new.head,
            free_flow_time=new.free_flow_time,
            capacity=new.capacity,
            length=new.length,
        )
        for index, new in enumerate(edit.added)
    ]
    rebuilt = rebuild_links(graph, removed, added)
    logger.info(
        "🔧 Topology edit: %d links removed, %d added", len(removed), len(added)
    )
    return scale_capacity(rebuilt, edit.capacity_scale)


def _read_lines(text: str | TextIO) -> list[str]:
    return text.splitlines() if isinstance(text, str) else text.read().splitlines()


def _parse_metadata(lines: list[str]) -> tuple[dict[str, str], int]:
    """Metadata tags and the index of the first line after the header."""
    metadata: dict[str, str] = {}
    for index, raw in enumerate(lines):
        line = raw.strip()
        if not line or line.startswith("~"):
            continue
        match = _METADATA_RE.match(line)
        if match is None:
            msg = "malformed header: expected a <TAG> line"
            raise ParseError(msg, index + 1)
        tag, value = match.group(1).strip().upper(), match.group(2).strip()
        if tag == _END_OF_METADATA:
            return metadata, index + 1
        metadata[tag] = value
    msg = "malformed header: missing <END OF METADATA>"
    raise ParseError(msg, len(lines))


def _metadata_int(metadata: dict[str, str], tag: str, *, required: bool) -> int | None:
    value = metadata.get(tag)
    if value is None:
        if required:
            msg = f"malformed header: missing <{tag}>"
            raise ParseError(msg, 1)
        return None
    try:
        return int(value)
    except ValueError:
        msg = f"malformed header: <{tag}> is not an integer"
        raise ParseError(msg, 1) from None


def _parse_net_row(fields: list[str], line_no: int, link_id: int) -> Link:
    try:
        tail, head = int(fields[0]) - 1, int(fields[1]) - 1
        capacity, length, fft = float(fields[2]), float(fields[3]), float(fields[4])
        bpr_a, bpr_b = float(fields[5]), float(fields[6])
    except ValueError:
        msg = "non-numeric link field"
        raise ParseError(msg, line_no) from None
    if capacity <= 0:
        msg = "non-positive capacity"
        raise ParseError(msg, line_no)
    if fft <= 0:
        msg = "non-positive free-flow time"
        raise ParseError(msg, line_no)
    if bpr_a < 0 or bpr_b < 1:
        msg = "BPR parameters need b >= 0 and power >= 1"
        raise ParseError(msg, line_no)
    return Link(
        id=link_id,
        tail=tail,
        head=head,
        free_flow_time=fft,
        capacity=capacity,
        bpr_a=bpr_a,
        bpr_b=bpr_b,
        length=length,
    )


def parse_tntp_net(text: str | TextIO) -> Graph:
    """Parse a TNTP network file. External node ids are 1-based."""
    lines = _read_lines(text)
    metadata, body_start = _parse_metadata(lines)
    n_nodes = _metadata_int(metadata, "NUMBER OF NODES", required=True)
    n_links = _metadata_int(metadata, "NUMBER OF LINKS", required=True)
    first_thru = _metadata_int(metadata, "FIRST THRU NODE", required=False) or 1
    assert n_nodes is not None
    assert n_links is not None

    links: list[Link] = []
    for index in range(body_start, len(lines)):
        line = lines[index].strip()
        if not line or line.startswith("~"):
            continue
        fields = line.rstrip(";").split()
        if len(fields) < _MIN_NET_COLUMNS:
            msg = f"expected at least {_MIN_NET_COLUMNS} columns, got {len(fields)}"
            raise ParseError(msg, index + 1)
        link = _parse_net_row(fields, index + 1, len(links))
        if not (0 <= link.tail < n_nodes and 0 <= link.head < n_nodes):
            msg = f"node count mismatch: link references a node above {n_nodes}"
            raise ParseError(msg, index + 1)
        links.append(link)

    if len(links) != n_links:
        msg = f"link count mismatch: header says {n_links}, found {len(links)}"
        raise ParseError(msg, len(lines))

    logger.debug("📊 Parsed network with %d nodes and %d links", n_nodes, n_links)
    return Graph(n_nodes=n_nodes, links=tuple(links), first_thru_node=first_thru - 1)


def _iter_trip_blocks(
    lines: list[str], start: int, n_zones: int | None
) -> Iterator[tuple[int, int, float]]:
    origin: int | None = None
    for index in range(start, len(lines)):
        line = lines[index].strip()
        if not line or line.startswith("~"):
            continue
        origin_match = _ORIGIN_RE.match(line)
        if origin_match is not None:
            origin = int(origin_match.group(1))
            if origin < 1 or (n_zones is not None and origin > n_zones):
                msg = f"origin block references unknown node {origin}"
                raise ParseError(msg, index + 1)
            continue
        if origin is None:
            msg = "demand entry outside an Origin block"
            raise ParseError(msg, index + 1)
        for destination_str, flow_str in _TRIP_ENTRY_RE.findall(line):
            destination = int(destination_str)
            if destination < 1 or (n_zones is not None and destination > n_zones):
                msg = f"demand entry references unknown node {destination}"
                raise ParseError(msg, index + 1)
            try:
                flow = float(flow_str)
            except ValueError:
                msg = f"non-numeric demand {flow_str!r}"
                raise ParseError(msg, index + 1) from None
            if flow < 0:
                msg = "negative demand"
                raise ParseError(msg, index + 1)
            yield origin, destination, flow


def parse_tntp_trips(text: str | TextIO, n_nodes: int | None = None) -> DemandMatrix:
    """Parse a TNTP trips file; zero and diagonal demands are omitted."""
    lines = _read_lines(text)
    has_header = any(_END_OF_METADATA in line.upper() for line in lines)
    metadata, body_start = _parse_metadata(lines) if has_header else ({}, 0)
    n_zones = _metadata_int(metadata, "NUMBER OF ZONES", required=False) or n_nodes

    entries: dict[tuple[int, int], float] = {}
    for origin, destination, flow in _iter_trip_blocks(lines, body_start, n_zones):
        if flow <= 0 or origin == destination:
            continue
        entries[(origin - 1, destination - 1)] = flow

    demand = DemandMatrix(entries)
    declared = metadata.get("TOTAL OD FLOW")
    if declared is not None and not np.isclose(float(declared), demand.total):
        logger.warning(
            "⚠️  Declared total OD flow %s differs from parsed total %.1f",
            declared,
            demand.total,
        )
    return demand


def format_tntp_net(graph: Graph) -> str:
    """Serialize a graph to the TNTP network layout."""
    out = io.StringIO()
    out.write(f"<NUMBER OF ZONES> {graph.n_nodes}\n")
    out.write(f"<NUMBER OF NODES> {graph.n_nodes}\n")
    out.write(f"<FIRST THRU NODE> {graph.first_thru_node + 1}\n")
    out.write(f"<NUMBER OF LINKS> {graph.n_links}\n")
    out.write("<END OF METADATA>\n\n\n")
    out.write(
        "~\tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower"
        "\tspeed\ttoll\tlink_type\t;\n"
    )
    for link in graph.links:
        out.write(
            f"\t{link.tail + 1}\t{link.head + 1}\t{link.capacity!r}\t{link.length!r}"
            f"\t{link.free_flow_time!r}\t{link.bpr_a!r}\t{link.bpr_b!r}\t0\t0\t1\t;\n"
        )
    return out.getvalue()


def format_tntp_trips(demand: DemandMatrix, n_zones: int) -> str:
    """Serialize a demand matrix to the TNTP trips layout."""
    out = io.StringIO()
    out.write(f"<NUMBER OF ZONES> {n_zones}\n")
    out.write(f"<TOTAL OD FLOW> {demand.total!r}\n")
    out.write("<END OF METADATA>\n\n\n")
    for origin, destinations in demand.by_origin().items():
        out.write(f"Origin \t{origin + 1}\n")
        out.write(
            "".join(f"{dest + 1:5d} : {flow!r};" for dest, flow in destinations)
        )
        out.write("\n\n")
    return out.getvalue()


def _read_file(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as e:
        msg = f"Could not read {path}: {e}"
        raise DataError(msg) from e


def load_graph(path: Path) -> Graph:
    return parse_tntp_net(_read_file(path))


def load_demand(path: Path, graph: Graph | None = None) -> DemandMatrix:
    return parse_tntp_trips(_read_file(path), graph.n_nodes if graph else None)
