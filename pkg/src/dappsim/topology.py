"""Disaggregated RAN graph: nodes, directed links and resource bookkeeping.

Topology values are immutable after construction and safe to share across
concurrent scenario runs. Latency figures are per-link constants; queueing
delay is out of scope.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

from .kinds import DATA_PRODUCER, DataKind, InterfaceKind, NodeKind
from .validation import ValidationReport

if TYPE_CHECKING:
    from .orchestrator import PlacementPlan


class UnknownNodeError(KeyError):
    pass


class NoPathError(Exception):
    pass


# Node-kind pairs each interface may connect (unordered; links are directed
# but legality is symmetric).
INTERFACE_ENDPOINTS: dict[InterfaceKind, frozenset[frozenset[NodeKind]]] = {
    InterfaceKind.E2: frozenset(
        {
            frozenset({NodeKind.NEAR_RT_RIC, NodeKind.DU}),
            frozenset({NodeKind.NEAR_RT_RIC, NodeKind.CU}),
        }
    ),
    InterfaceKind.A1: frozenset(
        {frozenset({NodeKind.NON_RT_RIC, NodeKind.NEAR_RT_RIC})}
    ),
    InterfaceKind.O1: frozenset(
        {
            frozenset({NodeKind.NON_RT_RIC, NodeKind.RU}),
            frozenset({NodeKind.NON_RT_RIC, NodeKind.DU}),
            frozenset({NodeKind.NON_RT_RIC, NodeKind.CU}),
            frozenset({NodeKind.NON_RT_RIC, NodeKind.NEAR_RT_RIC}),
        }
    ),
    InterfaceKind.F1: frozenset({frozenset({NodeKind.DU, NodeKind.CU})}),
    InterfaceKind.OPEN_FRONTHAUL: frozenset(
        {frozenset({NodeKind.RU, NodeKind.DU})}
    ),
}

# Interfaces that carry application data/control streams (A1/O1 move
# policies and lifecycle commands, not subscription traffic).
DATA_PLANE_INTERFACES = frozenset(
    {InterfaceKind.E2, InterfaceKind.F1, InterfaceKind.OPEN_FRONTHAUL}
)


@dataclass(frozen=True)
class ResourceVector:
    """Abstract node resources; accelerator units fold FPGAs into `gpu`."""

    cpu: float = 0.0
    gpu: float = 0.0
    memory_mib: float = 0.0

    def __add__(self, other: "ResourceVector") -> "ResourceVector":
        return ResourceVector(
            self.cpu + other.cpu,
            self.gpu + other.gpu,
            self.memory_mib + other.memory_mib,
        )

    def __sub__(self, other: "ResourceVector") -> "ResourceVector":
        return ResourceVector(
            self.cpu - other.cpu,
            self.gpu - other.gpu,
            self.memory_mib - other.memory_mib,
        )

    def scaled(self, factor: float) -> "ResourceVector":
        return ResourceVector(
            self.cpu * factor, self.gpu * factor, self.memory_mib * factor
        )

    def covers(self, other: "ResourceVector") -> bool:
        """Component-wise capacity check."""
        return (
            self.cpu >= other.cpu
            and self.gpu >= other.gpu
            and self.memory_mib >= other.memory_mib
        )

    @property
    def nonnegative(self) -> bool:
        return self.cpu >= 0 and self.gpu >= 0 and self.memory_mib >= 0


def default_hosted_data(kind: NodeKind) -> frozenset[DataKind]:
    """Data kinds locally available at a node of the given kind."""
    return frozenset(d for d, producer in DATA_PRODUCER.items() if producer == kind)


@dataclass(frozen=True)
class Node:
    id: str
    kind: NodeKind
    resources: ResourceVector = field(default_factory=ResourceVector)
    hosted_data: frozenset[DataKind] | None = None

    def data_kinds(self) -> frozenset[DataKind]:
        if self.hosted_data is not None:
            return self.hosted_data
        return default_hosted_data(self.kind)


@dataclass(frozen=True)
class Link:
    """Directed link; symmetric connections are two entries."""

    src: str
    dst: str
    interface: InterfaceKind
    propagation_us: float
    switching_us: float
    capacity_bps: float

    @property
    def key(self) -> str:
        return f"{self.src}->{self.dst}:{self.interface.value}"

    @property
    def fixed_latency_us(self) -> float:
        return self.propagation_us + self.switching_us


@dataclass(frozen=True)
class Topology:
    nodes: tuple[Node, ...]
    links: tuple[Link, ...]

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise UnknownNodeError(node_id)

    def has_node(self, node_id: str) -> bool:
        return any(n.id == node_id for n in self.nodes)

    def nodes_of_kind(self, kind: NodeKind) -> list[Node]:
        return sorted((n for n in self.nodes if n.kind == kind), key=lambda n: n.id)

    def outgoing(
        self, node_id: str, interface: InterfaceKind | None = None
    ) -> list[Link]:
        return [
            l
            for l in self.links
            if l.src == node_id and (interface is None or l.interface == interface)
        ]


def validate_topology(topo: Topology) -> ValidationReport:
    """Check every structural invariant; the report lists all breaches.

    Covers unique node ids, nonnegative resources, hosted-data consistency,
    dangling link endpoints, illegal interface pairings, nonpositive
    capacity, negative latencies and duplicate directed edges per interface.
    """
    report = ValidationReport()
    by_id: dict[str, Node] = {}
    for node in topo.nodes:
        if node.id in by_id:
            report.add("duplicate-node-id", node.id, "node id declared twice")
        by_id[node.id] = node
        if not node.resources.nonnegative:
            report.add("negative-resources", node.id, f"resources {node.resources}")
        if node.hosted_data is not None:
            for dk in node.hosted_data:
                if DATA_PRODUCER[dk] != node.kind:
                    report.add(
                        "hosted-data-mismatch",
                        node.id,
                        f"{dk.value} is produced at {DATA_PRODUCER[dk].value}, "
                        f"not {node.kind.value}",
                    )

    seen_edges: set[tuple[str, str, InterfaceKind]] = set()
    for link in topo.links:
        subject = link.key
        dangling = False
        for endpoint in (link.src, link.dst):
            if endpoint not in by_id:
                report.add("dangling-endpoint", subject, f"unknown node '{endpoint}'")
                dangling = True
        if not dangling:
            pair = frozenset({by_id[link.src].kind, by_id[link.dst].kind})
            if pair not in INTERFACE_ENDPOINTS[link.interface]:
                report.add(
                    "illegal-interface-pairing",
                    subject,
                    f"{link.interface.value} cannot connect "
                    f"{by_id[link.src].kind.value} and {by_id[link.dst].kind.value}",
                )
        if link.capacity_bps <= 0:
            report.add("nonpositive-capacity", subject, f"{link.capacity_bps} bit/s")
        if link.propagation_us < 0 or link.switching_us < 0:
            report.add("negative-latency", subject, "latencies must be >= 0")
        edge = (link.src, link.dst, link.interface)
        if edge in seen_edges:
            report.add("duplicate-link", subject, "directed edge declared twice")
        seen_edges.add(edge)
    return report


def chain_path(
    topo: Topology,
    src: str,
    dst: str,
    interface_chain: Sequence[InterfaceKind],
) -> list[Link]:
    """The minimum fixed-latency hop sequence realizing an interface chain.

    Hop i must use interface_chain[i]; ties broken by link key.

    Raises:
        NoPathError: no hop sequence realizes the chain from src to dst.
    """
    if not topo.has_node(src):
        raise UnknownNodeError(src)
    if not topo.has_node(dst):
        raise UnknownNodeError(dst)
    best: tuple[float, tuple[str, ...]] | None = None
    best_links: list[Link] | None = None

    def walk(node: str, idx: int, acc: float, links: list[Link]) -> None:
        nonlocal best, best_links
        if idx == len(interface_chain):
            if node == dst:
                key = (acc, tuple(l.key for l in links))
                if best is None or key < best:
                    best, best_links = key, list(links)
            return
        for link in sorted(
            topo.outgoing(node, interface_chain[idx]), key=lambda l: l.key
        ):
            links.append(link)
            walk(link.dst, idx + 1, acc + link.fixed_latency_us, links)
            links.pop()

    walk(src, 0, 0.0, [])
    if best_links is None:
        raise NoPathError(
            f"no {'/'.join(i.value for i in interface_chain)} path {src} -> {dst}"
        )
    return best_links


def path_latency(
    topo: Topology,
    src: str,
    dst: str,
    interface_chain: Sequence[InterfaceKind],
) -> float:
    """Fixed latency (propagation + switching) along an interface chain.

    Transmission time is excluded; it is per-message (see
    overhead.transfer_latency).

    Raises:
        NoPathError: no hop sequence realizes the chain from src to dst.
    """
    return sum(l.fixed_latency_us for l in chain_path(topo, src, dst, interface_chain))


def best_path(
    topo: Topology,
    src: str,
    dst: str,
    interfaces: Iterable[InterfaceKind] = DATA_PLANE_INTERFACES,
) -> list[Link]:
    """Minimum fixed-latency path over the given interfaces (Dijkstra).

    RIC nodes are stream endpoints, not routers: paths may start or end at
    them but never transit them (no DU -> RIC -> DU relaying). Ties broken
    by node id so results are deterministic.
    """
    if not topo.has_node(src):
        raise UnknownNodeError(src)
    if not topo.has_node(dst):
        raise UnknownNodeError(dst)
    allowed = frozenset(interfaces)
    no_transit = (NodeKind.NEAR_RT_RIC, NodeKind.NON_RT_RIC)
    if src == dst:
        return []
    frontier: list[tuple[float, str]] = [(0.0, src)]
    dist: dict[str, float] = {src: 0.0}
    parent: dict[str, Link] = {}
    while frontier:
        d, node = heapq.heappop(frontier)
        if node == dst:
            break
        if d > dist.get(node, float("inf")):
            continue
        if node != src and topo.node(node).kind in no_transit:
            continue
        for link in sorted(topo.outgoing(node), key=lambda l: (l.dst, l.interface)):
            if link.interface not in allowed:
                continue
            nd = d + link.fixed_latency_us
            if nd < dist.get(link.dst, float("inf")):
                dist[link.dst] = nd
                parent[link.dst] = link
                heapq.heappush(frontier, (nd, link.dst))
    if dst not in parent:
        raise NoPathError(f"no data path {src} -> {dst}")
    path: list[Link] = []
    node = dst
    while node != src:
        link = parent[node]
        path.append(link)
        node = link.src
    path.reverse()
    return path


def remaining_capacity(
    topo: Topology, node_id: str, plan: "PlacementPlan"
) -> ResourceVector:
    """Node resources minus footprints placed there; negative components
    signal over-allocation (flagged by placement validation, returned here
    for diagnostics)."""
    node = topo.node(node_id)
    used = ResourceVector()
    for assignment in plan.assignments.values():
        if assignment.node_id == node_id:
            used = used + assignment.spec.footprint
    return node.resources - used
