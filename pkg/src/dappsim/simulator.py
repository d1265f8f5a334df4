"""Deterministic discrete-event execution of a placed plan.

Each app instance loops: data production, stream transfer when inputs are
remote, inference, control application. Shared input streams are
deduplicated like the analytic ledger (one multicast stream per producer
node and data kind, charged once per link). One run is single-threaded
over its event queue; independent runs may execute concurrently since all
shared inputs are immutable.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .apps import AppSpec
from .conflicts import ConflictRecord, detect_direct
from .kinds import DataKind, InterfaceKind
from .orchestrator import PlacementPlan
from .overhead import srs_data_rate
from .topology import Link, Topology, best_path

if TYPE_CHECKING:
    from .scenario import Scenario


class InvalidScenarioError(ValueError):
    pass


class UnknownAxisError(ValueError):
    pass


SWEEP_AXES = (
    "app_count",
    "dapp_cap",
    "sounding_period",
    "num_ues",
    "urllc_prb_share",
)


class SchedulerKind(str, Enum):
    ROUND_ROBIN = "RoundRobin"
    PROPORTIONAL_FAIR = "ProportionalFair"


@dataclass(frozen=True)
class SliceConfig:
    urllc_prb_share: float
    scheduler: SchedulerKind

    def validate(self) -> None:
        if not 0.0 <= self.urllc_prb_share <= 1.0:
            raise ValueError("urllc_prb_share must lie in [0, 1]")


# Empirical URLLC latency tables, milliseconds, piecewise linear in the PRB
# share. Anchored facts: proportional fair is strictly faster below the 0.30
# crossover, round robin at or above it, and the round-robin floor is 4 ms.
# Values between anchors are synthetic fill.
PRB_SHARE_KNOTS = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
URLLC_LATENCY_MS = {
    SchedulerKind.ROUND_ROBIN: (40.0, 22.0, 12.0, 8.0, 6.0, 5.0, 4.5, 4.2, 4.0, 4.0, 4.0),
    SchedulerKind.PROPORTIONAL_FAIR: (18.0, 12.0, 9.0, 8.0, 8.5, 9.5, 11.0, 13.0, 15.0, 18.0, 22.0),
}


def urllc_latency(cfg: SliceConfig) -> float:
    """End-to-end URLLC latency in milliseconds for a slicing/scheduler mix."""
    cfg.validate()
    return float(
        np.interp(cfg.urllc_prb_share, PRB_SHARE_KNOTS, URLLC_LATENCY_MS[cfg.scheduler])
    )


class EventKind(Enum):
    DATA_READY = "DataReady"
    TRANSFER_DONE = "TransferDone"
    INFERENCE_DONE = "InferenceDone"
    CONTROL_APPLIED = "ControlApplied"
    APP_DEPLOYED = "AppDeployed"
    APP_TERMINATED = "AppTerminated"


@dataclass(frozen=True)
class Event:
    time_us: float
    seq: int
    kind: EventKind
    subject: str


@dataclass
class MetricsReport:
    e2_bits_total: float = 0.0
    fronthaul_bits_total: float = 0.0
    loop_latency_us: list[float] = field(default_factory=list)
    deadline_violations: int = 0
    urllc_latency_ms: float | None = None
    conflicts: list[ConflictRecord] = field(default_factory=list)
    duration_us: float = 0.0
    seed: int = 0

    @property
    def loops_completed(self) -> int:
        return len(self.loop_latency_us)

    @property
    def loop_latency_mean_us(self) -> float | None:
        if not self.loop_latency_us:
            return None
        return sum(self.loop_latency_us) / len(self.loop_latency_us)

    def to_dict(self) -> dict:
        return {
            "e2_bits_total": self.e2_bits_total,
            "fronthaul_bits_total": self.fronthaul_bits_total,
            "loop_latency_us": list(self.loop_latency_us),
            "deadline_violations": self.deadline_violations,
            "urllc_latency_ms": self.urllc_latency_ms,
            "conflicts": [
                {
                    "kind": c.kind.value,
                    "apps": sorted(c.apps),
                    "subject": c.subject,
                    "node": c.node,
                    "evidence": c.evidence,
                }
                for c in self.conflicts
            ],
            "duration_us": self.duration_us,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsReport":
        from .conflicts import ConflictKind

        conflicts = [
            ConflictRecord(
                kind=ConflictKind(c["kind"]),
                apps=frozenset(c["apps"]),
                subject=c["subject"],
                node=c.get("node"),
                evidence=c.get("evidence"),
            )
            for c in data.get("conflicts", [])
        ]
        return cls(
            e2_bits_total=data["e2_bits_total"],
            fronthaul_bits_total=data["fronthaul_bits_total"],
            loop_latency_us=list(data["loop_latency_us"]),
            deadline_violations=data["deadline_violations"],
            urllc_latency_ms=data.get("urllc_latency_ms"),
            conflicts=conflicts,
            duration_us=data["duration_us"],
            seed=data.get("seed", 0),
        )


@dataclass
class _Stream:
    """One deduplicated multicast stream: producer -> consumer nodes."""

    source: str
    kind: DataKind
    period_us: float
    volume_bits: float
    paths: dict[str, list[Link]]  # consumer node -> path

    @property
    def key(self) -> str:
        return f"{self.source}/{self.kind.value}"

    def tree_links(self) -> list[Link]:
        ordered: list[Link] = []
        seen: set[str] = set()
        for consumer in sorted(self.paths):
            for link in self.paths[consumer]:
                if link.key not in seen:
                    seen.add(link.key)
                    ordered.append(link)
        return ordered


@dataclass
class _AppState:
    task_id: str
    node_id: str
    spec: AppSpec
    remote_streams: list[str]  # stream keys this instance waits on
    cycle_start_us: float = 0.0
    pending: set[tuple[str, int]] = field(default_factory=set)


class _Engine:
    def __init__(
        self,
        topo: Topology,
        catalog: Sequence[AppSpec],
        plan: PlacementPlan,
        duration_us: float,
        seed: int,
        slice_cfg: SliceConfig | None,
    ):
        if duration_us <= 0:
            raise InvalidScenarioError("duration_us must be > 0")
        direct = detect_direct(plan)
        if direct:
            raise InvalidScenarioError(
                f"plan has unresolved direct conflicts: "
                f"{[c.subject for c in direct]}"
            )
        self.topo = topo
        self.catalog = list(catalog)
        self.plan = plan
        self.duration_us = float(duration_us)
        self.seed = seed
        self.slice_cfg = slice_cfg
        self.events: list[Event] = []
        self._queue: list[tuple[float, int, EventKind, str, object]] = []
        self._seq = 0
        self._link_busy_until: dict[str, float] = {}
        self._interface_bits: dict[InterfaceKind, float] = {}
        self._waiting: dict[tuple[str, int], list[_AppState]] = {}
        self.report = MetricsReport(duration_us=self.duration_us, seed=seed)

        self.streams = self._build_streams()
        self.apps = self._build_apps()

    # -- setup ---------------------------------------------------------

    def _build_streams(self) -> dict[str, _Stream]:
        subscribers: dict[tuple[str, DataKind], list[tuple[str, AppSpec]]] = {}
        for task_id in sorted(self.plan.assignments):
            a = self.plan.assignments[task_id]
            for req in a.spec.inputs:
                source = a.data_sources.get(req.kind)
                if source is None:
                    raise InvalidScenarioError(
                        f"{task_id}: no source bound for {req.kind.value}"
                    )
                if source == a.node_id:
                    continue
                subscribers.setdefault((source, req.kind), []).append(
                    (a.node_id, a.spec)
                )
        streams: dict[str, _Stream] = {}
        for (source, kind), subs in sorted(subscribers.items()):
            period = min(spec.control_period_us for _, spec in subs)
            max_rate = max(
                spec.requirement(kind).volume_bits_per_period / spec.control_period_us
                for _, spec in subs
            )
            # Per-cycle volume sized so the sustained rate equals the max
            # subscriber rate (exact when subscribers share one period).
            volume = max_rate * period
            paths = {}
            for node_id, _ in subs:
                if node_id not in paths:
                    paths[node_id] = best_path(self.topo, source, node_id)
            stream = _Stream(source, kind, period, volume, paths)
            streams[stream.key] = stream
        return streams

    def _build_apps(self) -> list[_AppState]:
        apps = []
        for task_id in sorted(self.plan.assignments):
            a = self.plan.assignments[task_id]
            remote = []
            for req in a.spec.inputs:
                source = a.data_sources[req.kind]
                if source != a.node_id:
                    remote.append(f"{source}/{req.kind.value}")
            apps.append(
                _AppState(
                    task_id=task_id,
                    node_id=a.node_id,
                    spec=a.spec,
                    remote_streams=sorted(remote),
                )
            )
        return apps

    # -- event plumbing --------------------------------------------------

    def _schedule(self, time_us: float, kind: EventKind, subject: str, payload: object):
        heapq.heappush(self._queue, (time_us, self._seq, kind, subject, payload))
        self._seq += 1

    def _emit(self, time_us: float, kind: EventKind, subject: str) -> None:
        self.events.append(Event(time_us, len(self.events), kind, subject))

    # -- handlers ---------------------------------------------------------

    def _launch_stream(self, time_us: float, stream: _Stream, cycle: int) -> None:
        arrival: dict[str, float] = {stream.source: time_us}
        for link in stream.tree_links():
            start = max(arrival[link.src], self._link_busy_until.get(link.key, 0.0))
            tx = stream.volume_bits / link.capacity_bps * 1e6
            finish = start + tx
            self._link_busy_until[link.key] = finish
            arrival[link.dst] = finish + link.fixed_latency_us
            if finish <= self.duration_us:
                self._interface_bits[link.interface] = (
                    self._interface_bits.get(link.interface, 0.0) + stream.volume_bits
                )
        for consumer in sorted(stream.paths):
            delivered = arrival[consumer]
            if delivered <= self.duration_us:
                self._schedule(
                    delivered,
                    EventKind.TRANSFER_DONE,
                    f"{stream.key}->{consumer}#{cycle}",
                    (stream, cycle, consumer),
                )
        next_time = time_us + stream.period_us
        if next_time < self.duration_us:
            self._schedule(
                next_time, EventKind.DATA_READY, f"{stream.key}#{cycle + 1}",
                ("stream", stream, cycle + 1),
            )

    def _stream_cycle_for(self, stream: _Stream, t_us: float) -> int:
        return max(0, math.ceil(t_us / stream.period_us - 1e-9))

    def _start_app_cycle(self, time_us: float, app: _AppState) -> None:
        app.cycle_start_us = time_us
        app.pending = set()
        for key in app.remote_streams:
            stream = self.streams[key]
            cycle = self._stream_cycle_for(stream, time_us)
            app.pending.add((key, cycle))
            self._waiting.setdefault((key, cycle), []).append(app)
        if not app.pending:
            self._schedule(
                time_us + app.spec.inference_latency_us,
                EventKind.INFERENCE_DONE,
                app.task_id,
                ("app", app),
            )

    def _finish_transfer(
        self, time_us: float, stream: _Stream, cycle: int, consumer: str
    ) -> None:
        waiters = self._waiting.pop((stream.key, cycle), [])
        still_waiting = []
        for app in waiters:
            if app.node_id != consumer:
                still_waiting.append(app)
                continue
            app.pending.discard((stream.key, cycle))
            if not app.pending:
                self._schedule(
                    time_us + app.spec.inference_latency_us,
                    EventKind.INFERENCE_DONE,
                    app.task_id,
                    ("app", app),
                )
        if still_waiting:
            self._waiting[(stream.key, cycle)] = still_waiting

    def _apply_control(self, time_us: float, app: _AppState) -> None:
        latency = time_us - app.cycle_start_us
        self.report.loop_latency_us.append(latency)
        if latency > app.spec.control_period_us:
            self.report.deadline_violations += 1
        period = app.spec.control_period_us
        spans = max(1, math.ceil(latency / period - 1e-9))
        next_start = app.cycle_start_us + spans * period
        if next_start < self.duration_us:
            self._schedule(
                next_start, EventKind.DATA_READY, app.task_id, ("app", app)
            )

    # -- main loop ---------------------------------------------------------

    def run(self) -> MetricsReport:
        for app in self.apps:
            self._schedule(0.0, EventKind.APP_DEPLOYED, app.task_id, ("deploy", app))
        for key in sorted(self.streams):
            self._schedule(
                0.0, EventKind.DATA_READY, f"{key}#0", ("stream", self.streams[key], 0)
            )
        for app in self.apps:
            self._schedule(0.0, EventKind.DATA_READY, app.task_id, ("app", app))
        for app in self.apps:
            self._schedule(
                self.duration_us, EventKind.APP_TERMINATED, app.task_id, ("stop", app)
            )

        while self._queue:
            time_us, _, kind, subject, payload = heapq.heappop(self._queue)
            if time_us > self.duration_us:
                continue
            self._emit(time_us, kind, subject)
            if kind == EventKind.DATA_READY:
                tag = payload[0]
                if tag == "stream":
                    _, stream, cycle = payload
                    self._launch_stream(time_us, stream, cycle)
                else:
                    self._start_app_cycle(time_us, payload[1])
            elif kind == EventKind.TRANSFER_DONE:
                stream, cycle, consumer = payload
                self._finish_transfer(time_us, stream, cycle, consumer)
            elif kind == EventKind.INFERENCE_DONE:
                app = payload[1]
                self._schedule(
                    time_us, EventKind.CONTROL_APPLIED, app.task_id, ("app", app)
                )
            elif kind == EventKind.CONTROL_APPLIED:
                self._apply_control(time_us, payload[1])

        self.report.e2_bits_total = self._interface_bits.get(InterfaceKind.E2, 0.0)
        self.report.fronthaul_bits_total = self._interface_bits.get(
            InterfaceKind.OPEN_FRONTHAUL, 0.0
        )
        if self.slice_cfg is not None:
            self.report.urllc_latency_ms = urllc_latency(self.slice_cfg)
        return self.report


def trace(
    topo: Topology,
    catalog: Sequence[AppSpec],
    plan: PlacementPlan,
    duration_us: float,
    seed: int = 0,
    slice_cfg: SliceConfig | None = None,
) -> tuple[MetricsReport, list[Event]]:
    """Run the engine and return the report plus the ordered event log."""
    engine = _Engine(topo, catalog, plan, duration_us, seed, slice_cfg)
    report = engine.run()
    return report, engine.events


def run(
    topo: Topology,
    catalog: Sequence[AppSpec],
    plan: PlacementPlan,
    duration_us: float,
    seed: int = 0,
    slice_cfg: SliceConfig | None = None,
) -> MetricsReport:
    """Simulate a placed plan for `duration_us`; see module docstring.

    Raises:
        InvalidScenarioError: nonpositive duration, unresolved direct
            conflicts, or assignments with unbound stream sources.
    """
    return trace(topo, catalog, plan, duration_us, seed, slice_cfg)[0]


@dataclass(frozen=True)
class SweepRow:
    value: object
    report: MetricsReport
    srs_data_rate_bps: float | None = None


def sweep(axis: str, values: Iterable, base: "Scenario") -> list[SweepRow]:
    """One placement + run per value along a named axis, shared seed.

    Axes: app_count (prefix of the intent's task list), dapp_cap,
    sounding_period (slots), num_ues, urllc_prb_share.
    """
    if axis not in SWEEP_AXES:
        raise UnknownAxisError(f"axis must be one of {SWEEP_AXES}, got '{axis}'")
    from .orchestrator import Intent, place

    rows: list[SweepRow] = []
    for value in values:
        scenario = base
        intent = base.intent
        cap = base.dapp_cap
        if axis == "app_count":
            intent = Intent(id=base.intent.id, tasks=base.intent.tasks[: int(value)])
        elif axis == "dapp_cap":
            cap = int(value)
        elif axis == "sounding_period":
            if base.srs is None:
                raise InvalidScenarioError("scenario has no srs section to sweep")
            scenario = replace(
                base, srs=replace(base.srs, sounding_period_slots=int(value))
            )
        elif axis == "num_ues":
            if base.srs is None:
                raise InvalidScenarioError("scenario has no srs section to sweep")
            scenario = replace(base, srs=replace(base.srs, num_ues=int(value)))
        elif axis == "urllc_prb_share":
            if base.slice_cfg is None:
                raise InvalidScenarioError("scenario has no slice section to sweep")
            scenario = replace(
                base,
                slice_cfg=replace(base.slice_cfg, urllc_prb_share=float(value)),
            )
        plan = place(intent, scenario.topology, scenario.catalog, cap)
        report = run(
            scenario.topology,
            scenario.catalog,
            plan,
            scenario.duration_us,
            scenario.seed,
            scenario.slice_cfg,
        )
        rate = srs_data_rate(scenario.srs) if scenario.srs is not None else None
        rows.append(SweepRow(value=value, report=report, srs_data_rate_bps=rate))
    return rows
