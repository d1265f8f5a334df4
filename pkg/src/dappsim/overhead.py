"""Analytical model of sample volumes, data rates, transfer latency and E2 load.

All functions are pure over immutable inputs. Units: bits, microseconds,
bits/second.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

from .kinds import DataKind, InterfaceKind
from .topology import Link, Topology, best_path

if TYPE_CHECKING:
    from .apps import AppSpec
    from .orchestrator import PlacementPlan


class EmptyPathError(ValueError):
    pass


class InvalidPlanError(ValueError):
    pass


@dataclass(frozen=True)
class SrsConfig:
    """Uplink sounding configuration used as the I/Q sample source.

    Two components (I and Q) per sample are implicit and fixed.
    """

    subcarriers: int
    symbols: int
    beams_monitored: int
    bits_per_component: int
    sounding_period_slots: int
    slot_duration_us: float
    num_ues: int = 1

    def validate(self) -> None:
        for name in (
            "subcarriers",
            "symbols",
            "beams_monitored",
            "bits_per_component",
            "sounding_period_slots",
            "slot_duration_us",
            "num_ues",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def sounding_period_us(self) -> float:
        return self.sounding_period_slots * self.slot_duration_us


def srs_payload_bits(cfg: SrsConfig) -> float:
    """I/Q bits produced by one sounding occasion for one UE."""
    cfg.validate()
    return (
        cfg.subcarriers
        * cfg.symbols
        * cfg.beams_monitored
        * 2
        * cfg.bits_per_component
    )


def srs_data_rate(cfg: SrsConfig) -> float:
    """Aggregate sounding data rate over all UEs, bits/second."""
    cfg.validate()
    per_ue = srs_payload_bits(cfg) / cfg.sounding_period_us * 1e6
    return cfg.num_ues * per_ue


def transfer_latency(volume_bits: float, path: Sequence[Link]) -> float:
    """Microseconds to move a message along a path.

    Fixed per-hop latencies plus one transmission term at the bottleneck
    capacity (store-and-forward coincides with this on the single-hop paths
    the analysis uses).
    """
    if not path:
        raise EmptyPathError("transfer requires a nonempty path")
    if volume_bits < 0:
        raise ValueError("volume must be >= 0")
    fixed = sum(link.fixed_latency_us for link in path)
    bottleneck = min(link.capacity_bps for link in path)
    return fixed + volume_bits / bottleneck * 1e6


@dataclass(frozen=True)
class FeasibilityBreakdown:
    feasible: bool
    accumulation_us: float
    transfer_us: float
    total_us: float
    deadline_us: float


def beam_mgmt_feasible(
    cfg: SrsConfig,
    required_soundings: int,
    path: Sequence[Link],
    deadline_us: float,
) -> FeasibilityBreakdown:
    """Can enough sounding samples for one inference reach a remote consumer
    in time? Accumulation (collecting the soundings) plus transfer of the
    whole batch must fit the deadline; the boundary is inclusive."""
    if required_soundings < 1:
        raise ValueError("required_soundings must be >= 1")
    accumulation = required_soundings * cfg.sounding_period_us
    transfer = transfer_latency(required_soundings * srs_payload_bits(cfg), path)
    total = accumulation + transfer
    return FeasibilityBreakdown(
        feasible=total <= deadline_us,
        accumulation_us=accumulation,
        transfer_us=transfer,
        total_us=total,
        deadline_us=deadline_us,
    )


@dataclass
class TrafficLedger:
    """Per-link sustained rates plus per-interface totals, bits/second."""

    per_link_bps: dict[str, float] = field(default_factory=dict)
    per_interface_bps: dict[InterfaceKind, float] = field(default_factory=dict)

    @property
    def e2_bps(self) -> float:
        return self.per_interface_bps.get(InterfaceKind.E2, 0.0)

    @property
    def total_bps(self) -> float:
        return sum(self.per_interface_bps.values())


def _stream_rate(spec: "AppSpec", kind: DataKind) -> float:
    req = spec.requirement(kind)
    return req.volume_bits_per_period / spec.control_period_us * 1e6


def e2_traffic(
    plan: "PlacementPlan",
    catalog: Iterable["AppSpec"],
    topo: Topology,
) -> TrafficLedger:
    """Sustained interface traffic generated by a placement.

    Remote input requirements contribute their stream rate to every link on
    the producer-to-host path. Identical (producer node, data kind) streams
    are deduplicated per link: subscribers share one stream, charged at the
    highest subscriber rate. Requirements whose bound producer is the
    hosting node itself are local and contribute nothing; enrichment
    information consumed away from the near-RT RIC travels the reverse E2
    direction like any other remote stream.

    Raises:
        InvalidPlanError: an assignment references unknown nodes or specs,
            is hosted on a node kind that cannot run it, or binds a data
            source that does not produce the kind.
    """
    from .kinds import HOSTED_APP_KIND

    catalog_ids = {spec.id for spec in catalog}
    # Per link: (producer node, kind) -> max subscriber rate.
    streams: dict[str, dict[tuple[str, DataKind], float]] = {}
    link_interface: dict[str, InterfaceKind] = {}

    for task_id in sorted(plan.assignments):
        assignment = plan.assignments[task_id]
        spec = assignment.spec
        if catalog_ids and spec.id not in catalog_ids:
            raise InvalidPlanError(f"{task_id}: spec '{spec.id}' not in catalog")
        if not topo.has_node(assignment.node_id):
            raise InvalidPlanError(f"{task_id}: unknown node '{assignment.node_id}'")
        host = topo.node(assignment.node_id)
        if HOSTED_APP_KIND[host.kind] != assignment.kind:
            raise InvalidPlanError(
                f"{task_id}: {host.kind.value} node cannot host a "
                f"{assignment.kind.value}"
            )
        for req in spec.inputs:
            source_id = assignment.data_sources.get(req.kind)
            if source_id is None:
                raise InvalidPlanError(
                    f"{task_id}: no data source bound for {req.kind.value}"
                )
            if not topo.has_node(source_id):
                raise InvalidPlanError(f"{task_id}: unknown source '{source_id}'")
            source = topo.node(source_id)
            if req.kind not in source.data_kinds():
                raise InvalidPlanError(
                    f"{task_id}: node '{source_id}' does not produce {req.kind.value}"
                )
            if source_id == assignment.node_id:
                continue  # local access, no interface traffic
            rate = _stream_rate(spec, req.kind)
            for link in best_path(topo, source_id, assignment.node_id):
                per_link = streams.setdefault(link.key, {})
                stream_key = (source_id, req.kind)
                per_link[stream_key] = max(per_link.get(stream_key, 0.0), rate)
                link_interface[link.key] = link.interface

    ledger = TrafficLedger()
    for link_key in sorted(streams):
        rate = sum(streams[link_key].values())
        ledger.per_link_bps[link_key] = rate
        iface = link_interface[link_key]
        ledger.per_interface_bps[iface] = (
            ledger.per_interface_bps.get(iface, 0.0) + rate
        )
    return ledger
