"""Pre-action and post-action conflict mitigation across placed apps.

Direct conflicts (two apps steering the same parameter instance) are
detected on the plan before execution; implicit conflicts are inferred
after the fact from the impact control actions have on shared KPM series.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .apps import AppSpec
from .orchestrator import Assignment, PlacementPlan


class EmptyLogError(ValueError):
    pass


class MissingPriorityError(ValueError):
    pass


class ConflictKind(Enum):
    DIRECT = "Direct"
    IMPLICIT = "Implicit"


@dataclass(frozen=True)
class ConflictRecord:
    kind: ConflictKind
    apps: frozenset[str]
    subject: str  # parameter id (direct) or KPM id (implicit)
    node: str | None = None  # controlled node instance, direct only
    evidence: float | None = None  # correlation score in [0, 1], implicit only

    def __post_init__(self) -> None:
        if self.kind == ConflictKind.DIRECT and len(self.apps) < 2:
            raise ValueError("direct conflicts involve at least two apps")
        if self.kind == ConflictKind.IMPLICIT and self.evidence is None:
            raise ValueError("implicit conflicts carry an evidence score")


@dataclass(frozen=True)
class ControlAction:
    """A control decision taken during a run, for post-action analysis."""

    time_us: float
    app_id: str
    parameter: str
    node: str | None = None


@dataclass(frozen=True)
class KpmSample:
    time_us: float
    kpm_id: str
    value: float


@dataclass(frozen=True)
class Veto:
    app_id: str
    parameter: str
    node: str | None = None
    unplaced: bool = False


def detect_direct(
    plan: PlacementPlan, catalog: Iterable[AppSpec] | None = None
) -> list[ConflictRecord]:
    """One record per parameter instance targeted by two or more placed apps.

    A parameter instance is (parameter id, controlled node): two dApps
    steering the scheduler of different DUs do not collide. The catalog is
    accepted for interface symmetry; assignments embed their specs.
    """
    del catalog
    controllers: dict[tuple[str, str], set[str]] = {}
    for task_id in sorted(plan.assignments):
        assignment = plan.assignments[task_id]
        for parameter, nodes in assignment.control_nodes.items():
            for node in nodes:
                controllers.setdefault((parameter, node), set()).add(task_id)
    records = []
    for (parameter, node), apps in sorted(controllers.items()):
        if len(apps) >= 2:
            records.append(
                ConflictRecord(
                    kind=ConflictKind.DIRECT,
                    apps=frozenset(apps),
                    subject=parameter,
                    node=node,
                )
            )
    return records


def _action_deltas(
    samples: Sequence[KpmSample], actions: Sequence[ControlAction], window_us: float
) -> list[float]:
    deltas = []
    for action in actions:
        before = None
        after = None
        for s in samples:
            if s.time_us <= action.time_us:
                before = s.value
            elif s.time_us <= action.time_us + window_us:
                after = s.value
                break
            else:
                break
        if before is not None and after is not None:
            deltas.append(after - before)
    return deltas


def detect_implicit(
    log: Sequence[ControlAction | KpmSample],
    window_us: float,
    threshold: float,
) -> list[ConflictRecord]:
    """Attribute KPM movement to control actions landing within the window.

    For each KPM series and each acting app, the evidence score is the
    absolute mean KPM delta following that app's actions, normalized by the
    largest single action delta observed on that KPM (hence bounded by 1).
    A record is emitted when at least two distinct apps clear the
    threshold; its evidence is the weakest qualifying score.
    """
    if not log:
        raise EmptyLogError("post-action verification needs a nonempty log")
    if window_us <= 0:
        raise ValueError("window_us must be > 0")

    series: dict[str, list[KpmSample]] = {}
    actions_by_app: dict[str, list[ControlAction]] = {}
    for entry in log:
        if isinstance(entry, KpmSample):
            series.setdefault(entry.kpm_id, []).append(entry)
        elif isinstance(entry, ControlAction):
            actions_by_app.setdefault(entry.app_id, []).append(entry)
    for samples in series.values():
        samples.sort(key=lambda s: s.time_us)
    for actions in actions_by_app.values():
        actions.sort(key=lambda a: a.time_us)

    records = []
    for kpm_id in sorted(series):
        samples = series[kpm_id]
        per_app_deltas = {
            app_id: _action_deltas(samples, actions, window_us)
            for app_id, actions in sorted(actions_by_app.items())
        }
        max_delta = max(
            (abs(d) for deltas in per_app_deltas.values() for d in deltas),
            default=0.0,
        )
        scores: dict[str, float] = {}
        for app_id, deltas in per_app_deltas.items():
            if not deltas or max_delta == 0.0:
                scores[app_id] = 0.0
            else:
                scores[app_id] = abs(sum(deltas) / len(deltas)) / max_delta
        qualifying = {a: s for a, s in scores.items() if s >= threshold and s > 0.0}
        if len(qualifying) >= 2:
            records.append(
                ConflictRecord(
                    kind=ConflictKind.IMPLICIT,
                    apps=frozenset(qualifying),
                    subject=kpm_id,
                    evidence=min(qualifying.values()),
                )
            )
    return records


def resolve(
    conflicts: Sequence[ConflictRecord],
    plan: PlacementPlan,
    priority: Mapping[str, int],
) -> tuple[PlacementPlan, list[Veto]]:
    """Strip losing apps of conflicted parameters; highest priority wins.

    Direct conflicts only: every app but the top-ranked one loses the
    parameter (the control target is removed from its spec; an app left
    with no controls is unplaced). Implicit conflicts are reported, never
    auto-resolved. Ties or missing ranks among conflicting apps raise
    MissingPriorityError.
    """
    losers: dict[str, set[str]] = {}  # task id -> parameters to drop
    vetoes: list[Veto] = []
    for record in conflicts:
        if record.kind != ConflictKind.DIRECT:
            continue
        ranks: dict[str, int] = {}
        for app in record.apps:
            if app not in priority:
                raise MissingPriorityError(f"no priority rank for '{app}'")
            ranks[app] = priority[app]
        ordered = sorted(record.apps, key=lambda a: ranks[a], reverse=True)
        top, runner_up = ordered[0], ordered[1]
        if ranks[top] == ranks[runner_up]:
            raise MissingPriorityError(
                f"priority tie on '{record.subject}' between "
                f"{sorted(a for a in record.apps if ranks[a] == ranks[top])}"
            )
        for app in ordered[1:]:
            losers.setdefault(app, set()).add(record.subject)
            vetoes.append(Veto(app_id=app, parameter=record.subject, node=record.node))

    if not losers:
        return plan, []

    adjusted: dict[str, Assignment] = {}
    unplaced: set[str] = set()
    for task_id, assignment in plan.assignments.items():
        dropped = losers.get(task_id)
        if not dropped:
            adjusted[task_id] = assignment
            continue
        kept_controls = tuple(
            c for c in assignment.spec.controls if c.parameter not in dropped
        )
        if not kept_controls and assignment.spec.controls:
            unplaced.add(task_id)
            continue
        new_spec = replace(assignment.spec, controls=kept_controls)
        new_control_nodes = {
            p: nodes
            for p, nodes in assignment.control_nodes.items()
            if p not in dropped
        }
        adjusted[task_id] = replace(
            assignment, spec=new_spec, control_nodes=new_control_nodes
        )
    vetoes = [
        replace(v, unplaced=v.app_id in unplaced) for v in vetoes
    ]
    new_plan = PlacementPlan(
        assignments=adjusted,
        objective_bps=plan.objective_bps,
        dapp_cap=plan.dapp_cap,
    )
    return new_plan, vetoes
