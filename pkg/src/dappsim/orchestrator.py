"""Intent-driven placement of inference/control tasks onto RAN nodes.

Tasks become rApps, xApps or dApps depending on where they land. A node is
eligible when (i) every input is local or reachable in time, (ii) it can
reach everything the app controls, and (iii) capacity and per-DU dApp caps
hold; the solver minimizes total sustained E2 traffic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import yaml

from .apps import AppSpec, ControlTarget, DataRequirement, TimescaleClass, timescale_class
from .kinds import DATA_PRODUCER, HOSTED_APP_KIND, AppKind, DataKind, NodeKind
from .overhead import e2_traffic, transfer_latency
from .topology import Node, NoPathError, Topology, best_path

# Exhaustive search is exact and used whenever the instance is small enough;
# larger intents fall back to the greedy pass.
EXHAUSTIVE_TASK_LIMIT = 10
EXHAUSTIVE_COMBO_LIMIT = 200_000

# Period given to dApps minted by split_xapp when the original loop is not
# already real time.
DEFAULT_DAPP_PERIOD_US = 1_000.0


class IntentParseError(ValueError):
    """Raised with field-path diagnostics when an intent document is bad."""


class InfeasiblePlacementError(Exception):
    def __init__(self, task_ids: Sequence[str], message: str = ""):
        self.task_ids = tuple(task_ids)
        detail = message or "no capacity-respecting candidate"
        super().__init__(f"infeasible tasks {list(self.task_ids)}: {detail}")


class InvalidPartitionError(ValueError):
    pass


@dataclass(frozen=True)
class TaskRequest:
    id: str
    inputs: frozenset[DataKind]
    controls: tuple[ControlTarget, ...]
    deadline_us: float
    scope: tuple[str, ...] = ()


@dataclass(frozen=True)
class Intent:
    id: str
    tasks: tuple[TaskRequest, ...]


@dataclass(frozen=True)
class Assignment:
    """One placed task: where it runs, as what, and its stream bindings."""

    task_id: str
    node_id: str
    kind: AppKind
    spec: AppSpec
    # Producer node bound per input kind; equal to node_id for local access.
    data_sources: Mapping[DataKind, str] = field(default_factory=dict)
    # Concrete nodes each controlled parameter acts on.
    control_nodes: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    scope: tuple[str, ...] = ()


@dataclass
class PlacementPlan:
    assignments: dict[str, Assignment] = field(default_factory=dict)
    objective_bps: float = 0.0
    dapp_cap: int | None = None

    @property
    def dapp_count(self) -> int:
        return sum(1 for a in self.assignments.values() if a.kind == AppKind.DAPP)


_TASK_KEYS = {"id", "inputs", "controls", "deadline_us", "scope"}
_CONTROL_KEYS = {"parameter", "controlled_at", "granularity_us"}


def _parse_control(raw: object, path: str, errors: list[str]) -> ControlTarget | None:
    if not isinstance(raw, dict):
        errors.append(f"{path}: control target must be a mapping")
        return None
    unknown = set(raw) - _CONTROL_KEYS
    if unknown:
        errors.append(f"{path}: unknown keys {sorted(unknown)}")
        return None
    try:
        at = NodeKind(raw.get("controlled_at"))
    except ValueError:
        errors.append(f"{path}.controlled_at: unknown node kind {raw.get('controlled_at')!r}")
        return None
    granularity = raw.get("granularity_us")
    if not isinstance(granularity, (int, float)) or granularity <= 0:
        errors.append(f"{path}.granularity_us: must be > 0")
        return None
    parameter = raw.get("parameter")
    if not isinstance(parameter, str) or not parameter:
        errors.append(f"{path}.parameter: must be a nonempty string")
        return None
    return ControlTarget(parameter, at, float(granularity))


def parse_intent(document: str | Mapping) -> Intent:
    """Turn the operator's intent document into a typed Intent.

    Accepts the YAML text of the intent section or its already-decoded
    mapping. Unknown keys, nonpositive deadlines and unknown data kinds are
    rejected with field-path diagnostics.
    """
    if isinstance(document, str):
        try:
            doc = yaml.safe_load(document)
        except yaml.YAMLError as exc:
            raise IntentParseError(f"intent: invalid YAML: {exc}") from exc
    else:
        doc = document
    if not isinstance(doc, dict):
        raise IntentParseError("intent: document must be a mapping")

    errors: list[str] = []
    unknown = set(doc) - {"id", "tasks"}
    if unknown:
        errors.append(f"intent: unknown keys {sorted(unknown)}")
    intent_id = doc.get("id")
    if not isinstance(intent_id, str) or not intent_id:
        errors.append("intent.id: must be a nonempty string")
    raw_tasks = doc.get("tasks")
    if raw_tasks is None:
        raw_tasks = []
    if not isinstance(raw_tasks, list):
        errors.append("intent.tasks: must be a list")
        raw_tasks = []

    tasks: list[TaskRequest] = []
    seen_ids: set[str] = set()
    for idx, raw in enumerate(raw_tasks):
        path = f"intent.tasks[{idx}]"
        if not isinstance(raw, dict):
            errors.append(f"{path}: task must be a mapping")
            continue
        unknown = set(raw) - _TASK_KEYS
        if unknown:
            errors.append(f"{path}: unknown keys {sorted(unknown)}")
        task_id = raw.get("id")
        if not isinstance(task_id, str) or not task_id:
            errors.append(f"{path}.id: must be a nonempty string")
            task_id = f"<task {idx}>"
        if task_id in seen_ids:
            errors.append(f"{path}.id: duplicate task id '{task_id}'")
        seen_ids.add(task_id)
        inputs: set[DataKind] = set()
        for kind_name in raw.get("inputs", []) or []:
            try:
                inputs.add(DataKind(kind_name))
            except ValueError:
                errors.append(f"{path}.inputs: unknown data kind {kind_name!r}")
        controls: list[ControlTarget] = []
        for cidx, rawc in enumerate(raw.get("controls", []) or []):
            target = _parse_control(rawc, f"{path}.controls[{cidx}]", errors)
            if target is not None:
                controls.append(target)
        deadline = raw.get("deadline_us")
        if not isinstance(deadline, (int, float)) or deadline <= 0:
            errors.append(f"{path}.deadline_us: must be > 0")
            deadline = 1.0
        scope = raw.get("scope", []) or []
        if not isinstance(scope, list) or not all(isinstance(s, str) for s in scope):
            errors.append(f"{path}.scope: must be a list of node ids")
            scope = []
        tasks.append(
            TaskRequest(
                id=task_id,
                inputs=frozenset(inputs),
                controls=tuple(controls),
                deadline_us=float(deadline),
                scope=tuple(scope),
            )
        )
    if errors:
        raise IntentParseError("; ".join(errors))
    return Intent(id=intent_id, tasks=tuple(tasks))


def _bind_source(
    topo: Topology, scope: Sequence[str], kind: DataKind, host: Node
) -> Node | None:
    """Pick the producer node for a data kind, preferring the task scope,
    then the host itself, then the nearest producer (ties by id)."""
    producer_kind = DATA_PRODUCER[kind]
    in_scope = [
        topo.node(nid)
        for nid in sorted(scope)
        if topo.has_node(nid)
        and topo.node(nid).kind == producer_kind
        and kind in topo.node(nid).data_kinds()
    ]
    candidates = in_scope or [
        n for n in topo.nodes_of_kind(producer_kind) if kind in n.data_kinds()
    ]
    if not candidates:
        return None
    for node in candidates:
        if node.id == host.id:
            return node
    best: tuple[float, str] | None = None
    chosen: Node | None = None
    for node in candidates:
        try:
            path = best_path(topo, node.id, host.id)
        except NoPathError:
            continue
        latency = sum(l.fixed_latency_us for l in path)
        key = (latency, node.id)
        if best is None or key < best:
            best, chosen = key, node
    return chosen


def _bind_controls(
    topo: Topology, scope: Sequence[str], spec: AppSpec, host: Node, deadline_us: float
) -> dict[str, tuple[str, ...]] | None:
    """Map each controlled parameter to concrete nodes, or None when some
    target cannot be commanded within the deadline."""
    bound: dict[str, tuple[str, ...]] = {}
    for target in spec.controls:
        scoped = [
            nid
            for nid in sorted(scope)
            if topo.has_node(nid) and topo.node(nid).kind == target.controlled_at
        ]
        if scoped:
            nodes = scoped
        elif host.kind == target.controlled_at:
            nodes = [host.id]
        else:
            kind_nodes = topo.nodes_of_kind(target.controlled_at)
            nodes = [kind_nodes[0].id] if kind_nodes else []
        if not nodes:
            return None
        for nid in nodes:
            if nid == host.id:
                continue
            try:
                path = best_path(topo, host.id, nid)
            except NoPathError:
                return None
            if sum(l.fixed_latency_us for l in path) > deadline_us:
                return None
        bound[target.parameter] = tuple(nodes)
    return bound


def _matching_specs(
    task: TaskRequest, catalog: Iterable[AppSpec], kind: AppKind
) -> list[AppSpec]:
    out = []
    for spec in sorted(catalog, key=lambda s: s.id):
        if spec.kind != kind:
            continue
        if not task.inputs <= spec.input_kinds():
            continue
        spec_keys = {c.match_key for c in spec.controls}
        if not {c.match_key for c in task.controls} <= spec_keys:
            continue
        if spec.control_period_us > task.deadline_us:
            continue
        out.append(spec)
    return out


def _try_bind(
    task: TaskRequest, spec: AppSpec, node: Node, topo: Topology
) -> Assignment | None:
    """Bind data sources and control targets for a spec at a node; None when
    any input or control misses the task deadline."""
    sources: dict[DataKind, str] = {}
    for req in spec.inputs:
        source = _bind_source(topo, task.scope, req.kind, node)
        if source is None:
            return None
        if source.id != node.id:
            try:
                path = best_path(topo, source.id, node.id)
            except NoPathError:
                return None
            if transfer_latency(req.volume_bits_per_period, path) > task.deadline_us:
                return None
        sources[req.kind] = source.id
    controls = _bind_controls(topo, task.scope, spec, node, task.deadline_us)
    if controls is None:
        return None
    return Assignment(
        task_id=task.id,
        node_id=node.id,
        kind=spec.kind,
        spec=spec,
        data_sources=sources,
        control_nodes=controls,
        scope=task.scope,
    )


def candidate_nodes(
    task: TaskRequest, topo: Topology, catalog: Iterable[AppSpec]
) -> set[tuple[str, AppKind]]:
    """Nodes (with the app kind they would host) where some catalog spec can
    realize the task with all inputs and controls reachable in time.
    Capacity is deliberately not checked here."""
    found: set[tuple[str, AppKind]] = set()
    for node in sorted(topo.nodes, key=lambda n: n.id):
        kind = HOSTED_APP_KIND[node.kind]
        if kind is None:
            continue
        for spec in _matching_specs(task, catalog, kind):
            if _try_bind(task, spec, node, topo) is not None:
                found.add((node.id, kind))
                break
    return found


def _candidate_assignments(
    task: TaskRequest, topo: Topology, catalog: Iterable[AppSpec]
) -> list[Assignment]:
    out: list[Assignment] = []
    for node in sorted(topo.nodes, key=lambda n: n.id):
        kind = HOSTED_APP_KIND[node.kind]
        if kind is None:
            continue
        for spec in _matching_specs(task, catalog, kind):
            bound = _try_bind(task, spec, node, topo)
            if bound is not None:
                out.append(bound)
    out.sort(key=lambda a: (a.node_id, a.spec.id))
    return out


# One remote-stream contribution: (link key, interface, source node, data
# kind, rate). Precomputed per candidate so solvers can score combinations
# without re-walking paths; _fast_e2 replays e2_traffic's accumulation
# order, so scores match the ledger bit for bit.
_Contribution = tuple[str, "InterfaceKind", str, DataKind, float]


def _stream_contributions(assignment: Assignment, topo: Topology) -> tuple:
    out: list[_Contribution] = []
    spec = assignment.spec
    for req in spec.inputs:
        source = assignment.data_sources[req.kind]
        if source == assignment.node_id:
            continue
        rate = req.volume_bits_per_period / spec.control_period_us * 1e6
        for link in best_path(topo, source, assignment.node_id):
            out.append((link.key, link.interface, source, req.kind, rate))
    return tuple(out)


def _fast_e2(ordered_contributions: Iterable[tuple]) -> float:
    from .kinds import InterfaceKind

    streams: dict[str, dict[tuple[str, DataKind], float]] = {}
    interfaces: dict[str, object] = {}
    for contributions in ordered_contributions:
        for link_key, interface, source, kind, rate in contributions:
            per_link = streams.setdefault(link_key, {})
            stream_key = (source, kind)
            per_link[stream_key] = max(per_link.get(stream_key, 0.0), rate)
            interfaces[link_key] = interface
    total = 0.0
    for link_key in sorted(streams):
        if interfaces[link_key] == InterfaceKind.E2:
            total += sum(streams[link_key].values())
    return total


def _capacity_ok(
    assignments: Iterable[Assignment], topo: Topology, dapp_cap: int | None
) -> bool:
    used: dict[str, list[float]] = {}
    dapps: dict[str, int] = {}
    for a in assignments:
        fp = a.spec.footprint
        acc = used.setdefault(a.node_id, [0.0, 0.0, 0.0])
        acc[0] += fp.cpu
        acc[1] += fp.gpu
        acc[2] += fp.memory_mib
        if a.kind == AppKind.DAPP and topo.node(a.node_id).kind == NodeKind.DU:
            dapps[a.node_id] = dapps.get(a.node_id, 0) + 1
    for node_id, (cpu, gpu, mem) in used.items():
        res = topo.node(node_id).resources
        if cpu > res.cpu or gpu > res.gpu or mem > res.memory_mib:
            return False
    if dapp_cap is not None and any(count > dapp_cap for count in dapps.values()):
        return False
    return True


def _selection_key(
    combo: Sequence[Assignment], objective: float
) -> tuple[float, int, tuple[str, ...], tuple[str, ...]]:
    # Deterministic total order: objective, then dApp count, then node ids
    # in task order, then spec ids.
    ordered = sorted(combo, key=lambda a: a.task_id)
    return (
        objective,
        sum(1 for a in combo if a.kind == AppKind.DAPP),
        tuple(a.node_id for a in ordered),
        tuple(a.spec.id for a in ordered),
    )


def place(
    intent: Intent,
    topo: Topology,
    catalog: Iterable[AppSpec],
    dapp_cap: int | None = None,
) -> PlacementPlan:
    """Assign every task to a candidate node minimizing total E2 traffic.

    Small instances are solved exactly by enumeration; larger intents use a
    greedy pass over tasks ordered by candidate-set size. Both honor
    per-node resources and the per-DU dApp cap and share the deterministic
    tie-breaking order.

    Raises:
        InfeasiblePlacementError: some task has no capacity-respecting
            candidate (the error carries the task ids).
    """
    catalog = list(catalog)
    tasks = sorted(intent.tasks, key=lambda t: t.id)
    per_task = {t.id: _candidate_assignments(t, topo, catalog) for t in tasks}

    no_candidates = [tid for tid, cands in per_task.items() if not cands]
    if no_candidates:
        raise InfeasiblePlacementError(no_candidates, "no eligible node")
    # A task none of whose candidates fits even in isolation can be named
    # precisely; joint conflicts surface from the solvers below.
    stuck = sorted(
        tid
        for tid, cands in per_task.items()
        if not any(_capacity_ok([c], topo, dapp_cap) for c in cands)
    )
    if stuck:
        raise InfeasiblePlacementError(stuck, "no capacity-respecting candidate")

    if not tasks:
        return PlacementPlan(assignments={}, objective_bps=0.0, dapp_cap=dapp_cap)

    combos = 1
    for cands in per_task.values():
        combos *= len(cands)
    if len(tasks) <= EXHAUSTIVE_TASK_LIMIT and combos <= EXHAUSTIVE_COMBO_LIMIT:
        plan = _place_exhaustive(tasks, per_task, topo, catalog, dapp_cap)
    else:
        plan = _place_greedy(tasks, per_task, topo, catalog, dapp_cap)
    report = verify_plan(plan, intent, topo, catalog, dapp_cap)
    if not report.ok:
        raise InfeasiblePlacementError(
            sorted(plan.assignments), "; ".join(str(v) for v in report)
        )
    return plan


def _place_exhaustive(
    tasks: Sequence[TaskRequest],
    per_task: Mapping[str, list[Assignment]],
    topo: Topology,
    catalog: list[AppSpec],
    dapp_cap: int | None,
) -> PlacementPlan:
    contribs = {
        t.id: [_stream_contributions(a, topo) for a in per_task[t.id]] for t in tasks
    }
    best_key = None
    best_combo: tuple[Assignment, ...] | None = None
    for picks in itertools.product(*(range(len(per_task[t.id])) for t in tasks)):
        combo = tuple(per_task[t.id][i] for t, i in zip(tasks, picks))
        if not _capacity_ok(combo, topo, dapp_cap):
            continue
        # tasks are id-sorted, so contribution order matches e2_traffic's
        objective = _fast_e2(contribs[t.id][i] for t, i in zip(tasks, picks))
        key = _selection_key(combo, objective)
        if best_key is None or key < best_key:
            best_key, best_combo = key, combo
    if best_combo is None:
        raise InfeasiblePlacementError(
            [t.id for t in tasks], "no joint capacity-feasible assignment"
        )
    assignments = {a.task_id: a for a in best_combo}
    plan = PlacementPlan(assignments=assignments, dapp_cap=dapp_cap)
    plan.objective_bps = e2_traffic(plan, catalog, topo).e2_bps
    return plan


def _place_greedy(
    tasks: Sequence[TaskRequest],
    per_task: Mapping[str, list[Assignment]],
    topo: Topology,
    catalog: list[AppSpec],
    dapp_cap: int | None,
) -> PlacementPlan:
    contribs = {
        t.id: {
            a.task_id + "/" + a.node_id + "/" + a.spec.id: _stream_contributions(a, topo)
            for a in per_task[t.id]
        }
        for t in tasks
    }

    def contribution_of(a: Assignment):
        return contribs[a.task_id][a.task_id + "/" + a.node_id + "/" + a.spec.id]

    order = sorted(tasks, key=lambda t: (len(per_task[t.id]), t.id))
    chosen: dict[str, Assignment] = {}
    for task in order:
        best_key = None
        best_assignment = None
        for candidate in per_task[task.id]:
            trial = list(chosen.values()) + [candidate]
            if not _capacity_ok(trial, topo, dapp_cap):
                continue
            ordered = sorted(trial, key=lambda a: a.task_id)
            objective = _fast_e2(contribution_of(a) for a in ordered)
            dapps = sum(1 for a in trial if a.kind == AppKind.DAPP)
            key = (objective, dapps, candidate.node_id, candidate.spec.id)
            if best_key is None or key < best_key:
                best_key, best_assignment = key, candidate
        if best_assignment is None:
            raise InfeasiblePlacementError(
                [task.id], "no capacity-respecting candidate remains"
            )
        chosen[task.id] = best_assignment
    plan = PlacementPlan(assignments=chosen, dapp_cap=dapp_cap)
    plan.objective_bps = e2_traffic(plan, catalog, topo).e2_bps
    return plan


def verify_plan(
    plan: PlacementPlan,
    intent: Intent,
    topo: Topology,
    catalog: Iterable[AppSpec],
    dapp_cap: int | None = None,
) -> "ValidationReport":
    """Re-validate a plan post hoc against the three eligibility constraints
    plus capacity and dApp caps."""
    from .validation import ValidationReport

    report = ValidationReport()
    tasks = {t.id: t for t in intent.tasks}
    for task_id in tasks:
        if task_id not in plan.assignments:
            report.add("unassigned-task", task_id, "task missing from plan")
    for task_id, assignment in plan.assignments.items():
        task = tasks.get(task_id)
        if task is None:
            report.add("unknown-task", task_id, "assignment for task not in intent")
            continue
        if _try_bind(task, assignment.spec, topo.node(assignment.node_id), topo) is None:
            report.add(
                "constraint-violation",
                task_id,
                f"spec {assignment.spec.id} not eligible at {assignment.node_id}",
            )
    if not _capacity_ok(plan.assignments.values(), topo, dapp_cap):
        report.add("capacity-violation", "plan", "resources or dApp cap exceeded")
    return report


def split_xapp(
    spec: AppSpec, parts: Sequence[Sequence[DataRequirement]]
) -> list[AppSpec]:
    """Convert an xApp into atomic dApps, one per input partition.

    Each part must map to a single DU/CU home (the unique non-RIC producer
    of its inputs); controls follow their controlled_at kind to the first
    part homed there. Footprint is divided proportionally to input volume.

    Raises:
        InvalidPartitionError: parts overlap, miss inputs, or a part has no
            unique DU/CU home, or some control matches no part.
    """
    all_reqs = {r.kind: r for r in spec.inputs}
    seen: set[DataKind] = set()
    for idx, part in enumerate(parts):
        if not part:
            raise InvalidPartitionError(f"part {idx} is empty")
        for req in part:
            if req.kind not in all_reqs or all_reqs[req.kind] != req:
                raise InvalidPartitionError(
                    f"part {idx}: {req.kind.value} is not an input of {spec.id}"
                )
            if req.kind in seen:
                raise InvalidPartitionError(
                    f"part {idx}: {req.kind.value} appears in two parts"
                )
            seen.add(req.kind)
    missing = set(all_reqs) - seen
    if missing:
        raise InvalidPartitionError(
            f"partition misses inputs {sorted(k.value for k in missing)}"
        )

    homes: list[NodeKind] = []
    for idx, part in enumerate(parts):
        producers = {
            DATA_PRODUCER[r.kind]
            for r in part
            if DATA_PRODUCER[r.kind] in (NodeKind.DU, NodeKind.CU)
        }
        if len(producers) != 1:
            raise InvalidPartitionError(
                f"part {idx} does not map to a single DU/CU home"
            )
        homes.append(producers.pop())

    claimed: set[int] = set()
    part_controls: list[tuple[ControlTarget, ...]] = []
    for idx, home in enumerate(homes):
        if home in homes[:idx]:
            part_controls.append(())
            continue
        owned = tuple(c for c in spec.controls if c.controlled_at == home)
        claimed.update(
            i for i, c in enumerate(spec.controls) if c.controlled_at == home
        )
        part_controls.append(owned)
    if len(claimed) != len(spec.controls):
        unmatched = [
            c.parameter for i, c in enumerate(spec.controls) if i not in claimed
        ]
        raise InvalidPartitionError(f"controls {unmatched} match no part's home kind")

    total_volume = sum(r.volume_bits_per_period for r in spec.inputs)
    period = (
        spec.control_period_us
        if timescale_class(spec.control_period_us) == TimescaleClass.REAL_TIME
        else DEFAULT_DAPP_PERIOD_US
    )
    out: list[AppSpec] = []
    for idx, part in enumerate(parts):
        volume = sum(r.volume_bits_per_period for r in part)
        fraction = volume / total_volume if total_volume else 1.0 / len(parts)
        out.append(
            AppSpec(
                id=f"{spec.id}.d{idx + 1}",
                kind=AppKind.DAPP,
                control_period_us=period,
                inference_latency_us=spec.inference_latency_us,
                footprint=spec.footprint.scaled(fraction),
                inputs=tuple(part),
                controls=part_controls[idx],
            )
        )
    return out


def describe_plan(plan: PlacementPlan, topo: Topology) -> dict:
    """JSON-ready view of a plan with per-constraint justification."""
    tasks = {}
    for task_id in sorted(plan.assignments):
        a = plan.assignments[task_id]
        node = topo.node(a.node_id)
        data = {}
        for kind in sorted(a.data_sources, key=lambda k: k.value):
            source = a.data_sources[kind]
            if source == a.node_id:
                data[kind.value] = f"local at {source}"
            else:
                data[kind.value] = f"streamed from {source}"
        controls = {
            param: list(nodes) for param, nodes in sorted(a.control_nodes.items())
        }
        tasks[task_id] = {
            "node": a.node_id,
            "node_kind": node.kind.value,
            "app_kind": a.kind.value,
            "spec": a.spec.id,
            "justification": {
                "data_availability": data,
                "control_reach": controls,
                "resources": (
                    f"footprint cpu={a.spec.footprint.cpu} gpu={a.spec.footprint.gpu} "
                    f"memory_mib={a.spec.footprint.memory_mib} within {a.node_id}"
                ),
            },
        }
    return {
        "assignments": tasks,
        "objective_e2_bps": plan.objective_bps,
        "dapp_count": plan.dapp_count,
        "dapp_cap": plan.dapp_cap,
        "notes": "O1 dispatch cost charged as zero",
    }
