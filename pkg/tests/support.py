"""Shared builders, random instance generators and the independent
placement oracle used by the unit and acceptance suites."""

from __future__ import annotations

import itertools
import random

from dappsim.apps import AppSpec, ControlTarget, DataRequirement
from dappsim.kinds import DATA_PRODUCER, HOSTED_APP_KIND, AppKind, DataKind, InterfaceKind, NodeKind
from dappsim.orchestrator import Assignment, Intent, PlacementPlan, TaskRequest
from dappsim.overhead import e2_traffic, transfer_latency
from dappsim.topology import Link, Node, NoPathError, ResourceVector, Topology, best_path

DU_KINDS = (DataKind.TRANSPORT_BLOCKS, DataKind.RLC_PACKETS, DataKind.DU_KPM)
CU_KINDS = (DataKind.PDCP_SDAP_DATA, DataKind.CU_KPM)


def rv(cpu=0.0, gpu=0.0, mem=0.0) -> ResourceVector:
    return ResourceVector(cpu=cpu, gpu=gpu, memory_mib=mem)


def e2_link(src: str, dst: str, prop=200.0, switch=50.0, cap=1e9) -> Link:
    return Link(src, dst, InterfaceKind.E2, prop, switch, cap)


def small_topology(num_dus: int = 1, with_cu: bool = False) -> Topology:
    """RUs, DUs, optional CU, one near-RT and one non-RT RIC, fully wired."""
    nodes = [
        Node("ric", NodeKind.NEAR_RT_RIC, rv(64, 8, 65536)),
        Node("nrt", NodeKind.NON_RT_RIC, rv(32, 0, 32768)),
    ]
    links: list[Link] = [
        Link("nrt", "ric", InterfaceKind.A1, 500, 100, 1e9),
        Link("ric", "nrt", InterfaceKind.A1, 500, 100, 1e9),
    ]
    for i in range(1, num_dus + 1):
        du = f"du{i}"
        ru = f"ru{i}"
        nodes.append(Node(du, NodeKind.DU, rv(16, 2, 8192)))
        nodes.append(Node(ru, NodeKind.RU))
        links.append(Link(ru, du, InterfaceKind.OPEN_FRONTHAUL, 100, 10, 1e11))
        links.append(Link(du, ru, InterfaceKind.OPEN_FRONTHAUL, 100, 10, 1e11))
        links.append(e2_link(du, "ric"))
        links.append(e2_link("ric", du))
        links.append(Link("nrt", du, InterfaceKind.O1, 500, 100, 1e9))
    if with_cu:
        nodes.append(Node("cu1", NodeKind.CU, rv(16, 2, 8192)))
        links.append(e2_link("cu1", "ric"))
        links.append(e2_link("ric", "cu1"))
        for i in range(1, num_dus + 1):
            links.append(Link(f"du{i}", "cu1", InterfaceKind.F1, 150, 20, 1e10))
            links.append(Link("cu1", f"du{i}", InterfaceKind.F1, 150, 20, 1e10))
    return Topology(nodes=tuple(nodes), links=tuple(links))


def make_app(
    app_id: str,
    kind: AppKind,
    period_us: float,
    inputs: list[tuple[DataKind, float, float]] = (),
    controls: list[tuple[str, NodeKind, float]] = (),
    inference_us: float = 200.0,
    footprint: ResourceVector | None = None,
) -> AppSpec:
    return AppSpec(
        id=app_id,
        kind=kind,
        control_period_us=period_us,
        inference_latency_us=inference_us,
        footprint=footprint or rv(1, 0, 256),
        inputs=tuple(DataRequirement(k, v, f) for k, v, f in inputs),
        controls=tuple(ControlTarget(p, at, g) for p, at, g in controls),
    )


def make_task(
    task_id: str,
    inputs: set[DataKind],
    deadline_us: float,
    scope: tuple[str, ...],
    controls: list[tuple[str, NodeKind, float]] = (),
) -> TaskRequest:
    return TaskRequest(
        id=task_id,
        inputs=frozenset(inputs),
        controls=tuple(ControlTarget(p, at, g) for p, at, g in controls),
        deadline_us=deadline_us,
        scope=scope,
    )


def manual_assignment(
    topo: Topology, task_id: str, node_id: str, spec: AppSpec, scope: tuple[str, ...]
) -> Assignment:
    """Bind an assignment's stream sources the way the orchestrator would:
    scope producers first, the host itself next, nearest otherwise."""
    host = topo.node(node_id)
    sources = {}
    for req in spec.inputs:
        producer_kind = DATA_PRODUCER[req.kind]
        scoped = [
            nid
            for nid in sorted(scope)
            if topo.has_node(nid) and topo.node(nid).kind == producer_kind
        ]
        if host.kind == producer_kind and (not scoped or host.id in scoped):
            sources[req.kind] = host.id
        elif scoped:
            sources[req.kind] = scoped[0]
        else:
            sources[req.kind] = topo.nodes_of_kind(producer_kind)[0].id
    control_nodes = {}
    for target in spec.controls:
        scoped = [
            nid
            for nid in sorted(scope)
            if topo.has_node(nid) and topo.node(nid).kind == target.controlled_at
        ]
        control_nodes[target.parameter] = tuple(scoped or [node_id])
    return Assignment(
        task_id=task_id,
        node_id=node_id,
        kind=HOSTED_APP_KIND[host.kind],
        spec=spec,
        data_sources=sources,
        control_nodes=control_nodes,
        scope=scope,
    )


def plan_of(topo: Topology, *assignments: Assignment) -> PlacementPlan:
    return PlacementPlan(assignments={a.task_id: a for a in assignments})


# ---------------------------------------------------------------------------
# Random placement instances (control-free; controls are exercised by the
# dedicated orchestrator/conflict tests).
# ---------------------------------------------------------------------------


def random_instance(rng: random.Random):
    """A random topology + catalog + intent with <= 4 tasks and <= 5 nodes
    (RUs excluded from the count; they host nothing)."""
    num_dus = rng.randint(1, 3)
    nodes = [Node("ric", NodeKind.NEAR_RT_RIC, rv(64, 8, 65536))]
    links: list[Link] = []
    for i in range(1, num_dus + 1):
        du = f"du{i}"
        nodes.append(Node(du, NodeKind.DU, rv(rng.choice([2, 4, 16]), 2, 8192)))
        links.append(e2_link(du, "ric", prop=rng.choice([100, 200]), switch=50))
        links.append(e2_link("ric", du, prop=rng.choice([100, 200]), switch=50))
    with_cu = rng.random() < 0.4 and num_dus <= 3
    if with_cu:
        nodes.append(Node("cu1", NodeKind.CU, rv(8, 2, 8192)))
        links.append(e2_link("cu1", "ric"))
        links.append(e2_link("ric", "cu1"))
        for i in range(1, num_dus + 1):
            links.append(Link(f"du{i}", "cu1", InterfaceKind.F1, 150, 20, 1e10))
            links.append(Link("cu1", f"du{i}", InterfaceKind.F1, 150, 20, 1e10))
    topo = Topology(nodes=tuple(nodes), links=tuple(links))

    catalog: list[AppSpec] = []
    tasks: list[TaskRequest] = []
    num_tasks = rng.randint(1, 4)
    for t in range(num_tasks):
        if with_cu and rng.random() < 0.3:
            home = "cu1"
            pool = CU_KINDS
        else:
            home = f"du{rng.randint(1, num_dus)}"
            pool = DU_KINDS
        kinds = rng.sample(pool, rng.randint(1, min(2, len(pool))))
        volume = rng.choice([10_000, 40_000, 120_000])
        xapp_inputs = [(k, float(volume), 200_000.0) for k in kinds]
        dapp_inputs = [(k, float(volume) / 100.0, 10_000.0) for k in kinds]
        maybe_ei = rng.random() < 0.3
        if maybe_ei:
            dapp_inputs.append((DataKind.ENRICHMENT_INFO, 500.0, 10_000.0))
        footprint = rv(rng.choice([1, 2, 3]), 0, 256)
        catalog.append(
            make_app(f"app{t}-x", AppKind.XAPP, 100_000.0, xapp_inputs, footprint=footprint)
        )
        catalog.append(
            make_app(f"app{t}-d", AppKind.DAPP, 1_000.0, dapp_inputs, footprint=footprint)
        )
        tasks.append(
            make_task(f"task{t:02d}", set(kinds), 200_000.0, scope=(home,))
        )
    intent = Intent(id="random", tasks=tuple(tasks))
    cap = rng.choice([0, 1, 2, None])
    return topo, catalog, intent, cap


# ---------------------------------------------------------------------------
# Independent exhaustive oracle: straight nested loops, own capacity math.
# ---------------------------------------------------------------------------


def _oracle_candidates(task: TaskRequest, topo: Topology, catalog) -> list[Assignment]:
    out = []
    for node in topo.nodes:
        host_kind = HOSTED_APP_KIND[node.kind]
        if host_kind is None:
            continue
        for spec in catalog:
            if spec.kind != host_kind:
                continue
            if not task.inputs <= {r.kind for r in spec.inputs}:
                continue
            if spec.control_period_us > task.deadline_us:
                continue
            sources = {}
            feasible = True
            for req in spec.inputs:
                producer = DATA_PRODUCER[req.kind]
                scoped = [
                    nid
                    for nid in sorted(task.scope)
                    if topo.node(nid).kind == producer
                ]
                pool = scoped or [n.id for n in topo.nodes_of_kind(producer)]
                if not pool:
                    feasible = False
                    break
                source = node.id if node.id in pool else pool[0]
                if source != node.id:
                    try:
                        path = best_path(topo, source, node.id)
                    except NoPathError:
                        feasible = False
                        break
                    if transfer_latency(req.volume_bits_per_period, path) > task.deadline_us:
                        feasible = False
                        break
                sources[req.kind] = source
            if not feasible:
                continue
            out.append(
                Assignment(
                    task_id=task.id,
                    node_id=node.id,
                    kind=host_kind,
                    spec=spec,
                    data_sources=sources,
                    control_nodes={},
                    scope=task.scope,
                )
            )
    return out


def oracle_place(intent: Intent, topo: Topology, catalog, dapp_cap):
    """Brute-force optimum: (objective_bps, assignment map) or None."""
    catalog = list(catalog)
    tasks = sorted(intent.tasks, key=lambda t: t.id)
    if not tasks:
        return 0.0, {}
    candidate_lists = [_oracle_candidates(t, topo, catalog) for t in tasks]
    if any(not c for c in candidate_lists):
        return None
    best = None
    for combo in itertools.product(*candidate_lists):
        cpu: dict[str, float] = {}
        gpu: dict[str, float] = {}
        mem: dict[str, float] = {}
        dapps: dict[str, int] = {}
        ok = True
        for a in combo:
            cpu[a.node_id] = cpu.get(a.node_id, 0.0) + a.spec.footprint.cpu
            gpu[a.node_id] = gpu.get(a.node_id, 0.0) + a.spec.footprint.gpu
            mem[a.node_id] = mem.get(a.node_id, 0.0) + a.spec.footprint.memory_mib
            if a.kind == AppKind.DAPP and topo.node(a.node_id).kind == NodeKind.DU:
                dapps[a.node_id] = dapps.get(a.node_id, 0) + 1
        for nid in cpu:
            res = topo.node(nid).resources
            if cpu[nid] > res.cpu or gpu[nid] > res.gpu or mem[nid] > res.memory_mib:
                ok = False
                break
        if ok and dapp_cap is not None and any(v > dapp_cap for v in dapps.values()):
            ok = False
        if not ok:
            continue
        plan = PlacementPlan(assignments={a.task_id: a for a in combo})
        objective = e2_traffic(plan, catalog, topo).e2_bps
        if best is None or objective < best[0]:
            best = (objective, {a.task_id: a for a in combo})
    return best
