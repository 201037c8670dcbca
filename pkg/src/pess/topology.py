"""Physical network model: nodes with CPU budgets, links with bandwidth and delay.

Capacities are kept as plain integers (cycles/s for nodes, bits/s for links) so
that embed/release bookkeeping stays exact. Every undirected link exposes two
directed arcs with independent bandwidth budgets; arc ``2*link_id`` runs from
``endpoints[0]`` to ``endpoints[1]`` and ``2*link_id + 1`` the other way.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import networkx as nx
import yaml

NodeId = int
LinkId = int

# Propagation speed in fiber: the raw light speed scaled by a refraction
# factor of 1.5.
_LIGHT_SPEED_M_S = 3.0e8
_FIBER_FACTOR = 1.5

# Default node profile: 32 cores at 2.1 GHz, and a per-node queuing budget of
# twelve 80 us port buffers (six 10 Gbps ports in, six out).
DEFAULT_CPU_CAPACITY = int(32 * 2.1e9)
DEFAULT_QUEUING_BUDGET = 12 * 80e-6
DEFAULT_LINK_BANDWIDTH = int(1e10)


class TopologyError(ValueError):
    """Raised for malformed topology documents or generator arguments."""


def propagation_delay(distance_km: float) -> float:
    """Propagation delay in seconds over ``distance_km`` of fiber."""
    if distance_km < 0:
        raise TopologyError(f"distance must be >= 0, got {distance_km}")
    return distance_km * 1000.0 * _FIBER_FACTOR / _LIGHT_SPEED_M_S


@dataclass(frozen=True)
class PhysicalNode:
    id: NodeId
    gamma_nominal: int  # CPU capacity, cycles/s
    queuing_budget: float  # worst-case local-network queuing, seconds
    name: str = ""

    def __post_init__(self) -> None:
        if self.gamma_nominal <= 0:
            raise TopologyError(f"node {self.id}: capacity must be > 0")
        if self.queuing_budget < 0:
            raise TopologyError(f"node {self.id}: queuing budget must be >= 0")


@dataclass(frozen=True)
class PhysicalLink:
    id: LinkId
    endpoints: tuple[NodeId, NodeId]
    beta_nominal: int  # bandwidth per direction, bits/s
    lambda_prop: float  # propagation delay, seconds

    def __post_init__(self) -> None:
        if self.endpoints[0] == self.endpoints[1]:
            raise TopologyError(f"link {self.id}: self-loops are not allowed")
        if self.beta_nominal <= 0:
            raise TopologyError(f"link {self.id}: bandwidth must be > 0")
        if self.lambda_prop < 0:
            raise TopologyError(f"link {self.id}: delay must be >= 0")


def default_node_profile(
    node_id: NodeId,
    name: str = "",
    *,
    cpu_capacity: int = DEFAULT_CPU_CAPACITY,
    queuing_budget: float = DEFAULT_QUEUING_BUDGET,
) -> PhysicalNode:
    """Build a node with the default CPU capacity and queuing budget."""
    return PhysicalNode(node_id, int(cpu_capacity), queuing_budget, name)


class PhysicalNetwork:
    """Immutable, connected multigraph-free network over dense integer ids.

    Treat instances as read-only after construction; the embedding code keeps
    all mutable bookkeeping in a separate state object so snapshots can be
    shared across threads.
    """

    def __init__(
        self,
        nodes: Iterable[PhysicalNode],
        links: Iterable[PhysicalLink],
        regions: Mapping[str, Iterable[NodeId]] | None = None,
    ) -> None:
        self.nodes: tuple[PhysicalNode, ...] = tuple(nodes)
        self.links: tuple[PhysicalLink, ...] = tuple(links)
        for idx, node in enumerate(self.nodes):
            if node.id != idx:
                raise TopologyError(
                    f"nodes[{idx}]: ids must be dense and in order, got {node.id}"
                )
        for idx, link in enumerate(self.links):
            if link.id != idx:
                raise TopologyError(
                    f"links[{idx}]: ids must be dense and in order, got {link.id}"
                )
            for end in link.endpoints:
                if not 0 <= end < len(self.nodes):
                    raise TopologyError(f"links[{idx}]: unknown node id {end}")

        adjacency: list[list[tuple[NodeId, int]]] = [[] for _ in self.nodes]
        arc_index: dict[tuple[NodeId, NodeId], int] = {}
        for link in self.links:
            a, b = link.endpoints
            if (a, b) in arc_index:
                raise TopologyError(
                    f"links[{link.id}]: duplicate link between {a} and {b}"
                )
            arc_index[(a, b)] = 2 * link.id
            arc_index[(b, a)] = 2 * link.id + 1
            adjacency[a].append((b, 2 * link.id))
            adjacency[b].append((a, 2 * link.id + 1))
        self.adjacency: tuple[tuple[tuple[NodeId, int], ...], ...] = tuple(
            tuple(neigh) for neigh in adjacency
        )
        self._arc_index = arc_index

        self.regions: dict[str, frozenset[NodeId]] = {}
        for region_name, members in sorted((regions or {}).items()):
            member_set = frozenset(members)
            if not member_set:
                raise TopologyError(f"region '{region_name}' is empty")
            for member in member_set:
                if not 0 <= member < len(self.nodes):
                    raise TopologyError(
                        f"region '{region_name}': unknown node id {member}"
                    )
            self.regions[region_name] = member_set

        self._check_connected()
        self.total_cpu = sum(node.gamma_nominal for node in self.nodes)

    # -- basic views ----------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def n_arcs(self) -> int:
        return 2 * len(self.links)

    def arc(self, tail: NodeId, head: NodeId) -> int:
        """Directed arc index for tail -> head; raises if not adjacent."""
        try:
            return self._arc_index[(tail, head)]
        except KeyError:
            raise TopologyError(f"no link between {tail} and {head}") from None

    def arc_delay(self, arc: int) -> float:
        return self.links[arc // 2].lambda_prop

    def arc_bandwidth(self, arc: int) -> int:
        return self.links[arc // 2].beta_nominal

    def node_by_name(self, name: str) -> PhysicalNode:
        for node in self.nodes:
            if node.name == name:
                return node
        raise TopologyError(f"no node named '{name}'")

    def _check_connected(self) -> None:
        if not self.nodes:
            raise TopologyError("topology has no nodes")
        seen = [False] * len(self.nodes)
        stack = [0]
        seen[0] = True
        while stack:
            here = stack.pop()
            for neighbor, _ in self.adjacency[here]:
                if not seen[neighbor]:
                    seen[neighbor] = True
                    stack.append(neighbor)
        if not all(seen):
            missing = seen.index(False)
            raise TopologyError(
                f"topology is disconnected (node {missing} unreachable from node 0)"
            )


def generate_barabasi_albert(
    n_nodes: int,
    m: int,
    seed: int,
    *,
    distance_range_km: tuple[float, float] = (10.0, 100.0),
    bandwidth: int = DEFAULT_LINK_BANDWIDTH,
    cpu_capacity: int = DEFAULT_CPU_CAPACITY,
    queuing_budget: float = DEFAULT_QUEUING_BUDGET,
) -> PhysicalNetwork:
    """Random scale-free network with exactly ``m * n_nodes - m**2`` links.

    Growth starts from an ``m``-leaf star, so the result is always connected.
    Link distances are drawn uniformly from ``distance_range_km`` and mapped
    to propagation delays; one seed fixes both the attachment process and the
    distance draws.
    """
    if m < 1:
        raise TopologyError(f"attachment parameter m must be >= 1, got {m}")
    if n_nodes <= m:
        raise TopologyError(
            f"need more than m={m} nodes to grow the attachment process, got {n_nodes}"
        )
    lo, hi = distance_range_km
    if lo < 0 or hi < lo:
        raise TopologyError(f"bad distance range {distance_range_km}")

    rng = random.Random(seed)
    graph = nx.barabasi_albert_graph(n_nodes, m, seed=rng)
    expected_links = m * n_nodes - m * m
    if graph.number_of_edges() != expected_links:  # pragma: no cover
        raise TopologyError(
            f"generator produced {graph.number_of_edges()} links, "
            f"expected {expected_links}"
        )

    nodes = [
        default_node_profile(
            i, cpu_capacity=cpu_capacity, queuing_budget=queuing_budget
        )
        for i in range(n_nodes)
    ]
    links = []
    for link_id, (a, b) in enumerate(graph.edges()):
        distance = rng.uniform(lo, hi)
        links.append(
            PhysicalLink(link_id, (a, b), int(bandwidth), propagation_delay(distance))
        )
    return PhysicalNetwork(nodes, links)


# -- document I/O --------------------------------------------------------


def _doc_error(location: str, message: str) -> TopologyError:
    return TopologyError(f"{location}: {message}")


def load_topology(source: str | Path | Mapping) -> PhysicalNetwork:
    """Parse a topology document (YAML text, path, or already-parsed mapping).

    The document has three top-level keys: ``nodes`` (name, capacity, optional
    queuing_budget), ``links`` (endpoints plus bandwidth and either
    distance_km or an explicit delay; delay wins when both appear), and
    optional ``regions`` mapping region names to node-name lists.
    """
    doc = source
    if isinstance(source, Path):
        doc = yaml.safe_load(source.read_text())
    elif isinstance(source, str):
        if "\n" not in source and Path(source).exists():
            doc = yaml.safe_load(Path(source).read_text())
        else:
            doc = yaml.safe_load(source)
    if not isinstance(doc, Mapping):
        raise TopologyError("topology document must be a mapping")

    raw_nodes = doc.get("nodes")
    if not isinstance(raw_nodes, list) or not raw_nodes:
        raise TopologyError("'nodes' must be a non-empty list")
    nodes: list[PhysicalNode] = []
    by_name: dict[str, NodeId] = {}
    for idx, entry in enumerate(raw_nodes):
        where = f"nodes[{idx}]"
        if not isinstance(entry, Mapping):
            raise _doc_error(where, "expected a mapping")
        name = str(entry.get("name", idx))
        if name in by_name:
            raise _doc_error(where, f"duplicate name '{name}'")
        capacity = entry.get("capacity", DEFAULT_CPU_CAPACITY)
        try:
            capacity = int(capacity)
        except (TypeError, ValueError):
            raise _doc_error(where, f"capacity must be a number, got {capacity!r}")
        if capacity <= 0:
            raise _doc_error(where, "capacity must be > 0")
        budget = entry.get("queuing_budget", DEFAULT_QUEUING_BUDGET)
        try:
            budget = float(budget)
        except (TypeError, ValueError):
            raise _doc_error(where, f"queuing_budget must be a number, got {budget!r}")
        if budget < 0:
            raise _doc_error(where, "queuing_budget must be >= 0")
        by_name[name] = idx
        nodes.append(PhysicalNode(idx, capacity, budget, name))

    def resolve(where: str, ref) -> NodeId:
        if isinstance(ref, bool):
            raise _doc_error(where, f"unknown node {ref!r}")
        if isinstance(ref, int):
            if 0 <= ref < len(nodes):
                return ref
            raise _doc_error(where, f"unknown node id {ref}")
        ref = str(ref)
        if ref in by_name:
            return by_name[ref]
        raise _doc_error(where, f"unknown node '{ref}'")

    raw_links = doc.get("links")
    if not isinstance(raw_links, list) or not raw_links:
        raise TopologyError("'links' must be a non-empty list")
    links: list[PhysicalLink] = []
    for idx, entry in enumerate(raw_links):
        where = f"links[{idx}]"
        if not isinstance(entry, Mapping):
            raise _doc_error(where, "expected a mapping")
        ends = entry.get("endpoints")
        if not isinstance(ends, list) or len(ends) != 2:
            raise _doc_error(where, "endpoints must be a 2-item list")
        a = resolve(where, ends[0])
        b = resolve(where, ends[1])
        if a == b:
            raise _doc_error(where, "self-loops are not allowed")
        bandwidth = entry.get("bandwidth", DEFAULT_LINK_BANDWIDTH)
        try:
            bandwidth = int(bandwidth)
        except (TypeError, ValueError):
            raise _doc_error(where, f"bandwidth must be a number, got {bandwidth!r}")
        if bandwidth <= 0:
            raise _doc_error(where, "bandwidth must be > 0")
        if "delay" in entry:
            delay = float(entry["delay"])
            if delay < 0:
                raise _doc_error(where, "delay must be >= 0")
        elif "distance_km" in entry:
            try:
                delay = propagation_delay(float(entry["distance_km"]))
            except TopologyError as exc:
                raise _doc_error(where, str(exc)) from None
        else:
            raise _doc_error(where, "need either 'distance_km' or 'delay'")
        links.append(PhysicalLink(idx, (a, b), bandwidth, delay))

    regions: dict[str, list[NodeId]] = {}
    raw_regions = doc.get("regions", {})
    if raw_regions is None:
        raw_regions = {}
    if not isinstance(raw_regions, Mapping):
        raise TopologyError("'regions' must be a mapping")
    for region_name, members in raw_regions.items():
        where = f"regions['{region_name}']"
        if not isinstance(members, list) or not members:
            raise _doc_error(where, "expected a non-empty list of nodes")
        regions[str(region_name)] = [resolve(where, ref) for ref in members]

    return PhysicalNetwork(nodes, links, regions)


def topology_to_doc(net: PhysicalNetwork) -> dict:
    """Plain-data form of ``net``; feeding it back to load_topology round-trips."""
    id_to_name = {node.id: node.name or str(node.id) for node in net.nodes}
    return {
        "nodes": [
            {
                "name": id_to_name[node.id],
                "capacity": node.gamma_nominal,
                "queuing_budget": node.queuing_budget,
            }
            for node in net.nodes
        ],
        "links": [
            {
                "endpoints": [id_to_name[link.endpoints[0]], id_to_name[link.endpoints[1]]],
                "bandwidth": link.beta_nominal,
                "delay": link.lambda_prop,
            }
            for link in net.links
        ],
        "regions": {
            name: sorted(id_to_name[member] for member in members)
            for name, members in sorted(net.regions.items())
        },
    }


def dump_topology(net: PhysicalNetwork) -> str:
    return yaml.safe_dump(topology_to_doc(net), sort_keys=False)


def builtin_profile(name: str) -> PhysicalNetwork:
    """Load one of the bundled reference networks ('garr' or 'stanford')."""
    from importlib.resources import files

    candidate = files("pess").joinpath(f"networks/{name.lower()}.yaml")
    if not candidate.is_file():
        raise TopologyError(f"no bundled topology named '{name}'")
    return load_topology(candidate.read_text())
