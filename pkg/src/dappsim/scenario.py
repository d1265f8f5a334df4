"""Scenario file ingestion: one YAML document drives every subcommand.

The document has five sections (topology, apps, intent, priorities,
simulation) plus an optional sweep spec. Structure is enforced by the JSON
Schema shipped in dappsim/schemas/scenario.schema.json; unknown keys are
errors. Semantic rules live with the modules that own them and are
aggregated by validate_scenario.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import yaml

from .apps import AppSpec, ControlTarget, DataRequirement, validate_app
from .kinds import AppKind, DataKind, InterfaceKind, NodeKind
from .orchestrator import Intent, IntentParseError, parse_intent
from .overhead import SrsConfig
from .simulator import SchedulerKind, SliceConfig
from .topology import Link, Node, ResourceVector, Topology, validate_topology
from .validation import ValidationReport


class ScenarioParseError(ValueError):
    """Syntax or schema problem; semantic violations are reported separately."""


@dataclass(frozen=True)
class BeamCheckConfig:
    """Remote beam-inference feasibility check parameters (fig3 scenarios)."""

    required_soundings: int
    deadline_us: float
    src: str
    dst: str
    interfaces: tuple[InterfaceKind, ...]


@dataclass(frozen=True)
class Scenario:
    topology: Topology
    catalog: tuple[AppSpec, ...]
    intent: Intent
    priorities: dict[str, int] = field(default_factory=dict)
    duration_us: float = 1_000_000.0
    seed: int = 0
    dapp_cap: int | None = None
    slice_cfg: SliceConfig | None = None
    srs: SrsConfig | None = None
    beam_check: BeamCheckConfig | None = None
    sweep_axis: str | None = None
    sweep_values: tuple = ()


def _schema() -> dict:
    text = resources.files("dappsim").joinpath("schemas/scenario.schema.json").read_text()
    return json.loads(text)


def _build_resources(raw: dict | None) -> ResourceVector:
    raw = raw or {}
    return ResourceVector(
        cpu=float(raw.get("cpu", 0.0)),
        gpu=float(raw.get("gpu", 0.0)),
        memory_mib=float(raw.get("memory_mib", 0.0)),
    )


def _build_topology(section: dict) -> Topology:
    nodes = tuple(
        Node(
            id=n["id"],
            kind=NodeKind(n["kind"]),
            resources=_build_resources(n.get("resources")),
            hosted_data=(
                frozenset(DataKind(d) for d in n["hosted_data"])
                if "hosted_data" in n
                else None
            ),
        )
        for n in section.get("nodes", [])
    )
    links: list[Link] = []
    for l in section.get("links", []):
        link = Link(
            src=l["src"],
            dst=l["dst"],
            interface=InterfaceKind(l["interface"]),
            propagation_us=float(l["propagation_us"]),
            switching_us=float(l["switching_us"]),
            capacity_bps=float(l["capacity_bps"]),
        )
        links.append(link)
        if l.get("bidirectional", False):
            links.append(
                Link(
                    src=l["dst"],
                    dst=l["src"],
                    interface=link.interface,
                    propagation_us=link.propagation_us,
                    switching_us=link.switching_us,
                    capacity_bps=link.capacity_bps,
                )
            )
    return Topology(nodes=nodes, links=tuple(links))


def _build_app(raw: dict) -> AppSpec:
    return AppSpec(
        id=raw["id"],
        kind=AppKind(raw["kind"]),
        control_period_us=float(raw["control_period_us"]),
        inference_latency_us=float(raw["inference_latency_us"]),
        footprint=_build_resources(raw.get("footprint")),
        inputs=tuple(
            DataRequirement(
                kind=DataKind(r["kind"]),
                volume_bits_per_period=float(r["volume_bits_per_period"]),
                freshness_deadline_us=float(r["freshness_deadline_us"]),
            )
            for r in raw.get("inputs", [])
        ),
        controls=tuple(
            ControlTarget(
                parameter=c["parameter"],
                controlled_at=NodeKind(c["controlled_at"]),
                granularity_us=float(c["granularity_us"]),
            )
            for c in raw.get("controls", [])
        ),
    )


def loads(text: str) -> Scenario:
    """Parse a scenario document from YAML text.

    Raises:
        ScenarioParseError: malformed YAML, schema violations, or an intent
            section that fails parsing.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioParseError(f"invalid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioParseError("scenario document must be a mapping")

    validator = jsonschema.Draft202012Validator(_schema())
    problems = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if problems:
        details = "; ".join(
            f"{'/'.join(str(p) for p in e.absolute_path) or '<root>'}: {e.message}"
            for e in problems
        )
        raise ScenarioParseError(f"schema violations: {details}")

    try:
        intent = parse_intent(doc["intent"])
    except IntentParseError as exc:
        raise ScenarioParseError(str(exc)) from exc

    sim = doc["simulation"]
    slice_raw = sim.get("slice")
    slice_cfg = (
        SliceConfig(
            urllc_prb_share=float(slice_raw["urllc_prb_share"]),
            scheduler=SchedulerKind(slice_raw["scheduler"]),
        )
        if slice_raw
        else None
    )

    sweep_raw = doc.get("sweep", {}) or {}
    srs_raw = sweep_raw.get("srs")
    srs = (
        SrsConfig(
            subcarriers=int(srs_raw["subcarriers"]),
            symbols=int(srs_raw["symbols"]),
            beams_monitored=int(srs_raw["beams_monitored"]),
            bits_per_component=int(srs_raw["bits_per_component"]),
            sounding_period_slots=int(srs_raw["sounding_period_slots"]),
            slot_duration_us=float(srs_raw["slot_duration_us"]),
            num_ues=int(srs_raw.get("num_ues", 1)),
        )
        if srs_raw
        else None
    )
    beam_raw = sweep_raw.get("beam_check")
    beam_check = (
        BeamCheckConfig(
            required_soundings=int(beam_raw["required_soundings"]),
            deadline_us=float(beam_raw["deadline_us"]),
            src=beam_raw["src"],
            dst=beam_raw["dst"],
            interfaces=tuple(InterfaceKind(i) for i in beam_raw["interfaces"]),
        )
        if beam_raw
        else None
    )

    return Scenario(
        topology=_build_topology(doc["topology"]),
        catalog=tuple(_build_app(a) for a in doc["apps"]),
        intent=intent,
        priorities={k: int(v) for k, v in (doc.get("priorities") or {}).items()},
        duration_us=float(sim["duration_us"]),
        seed=int(sim.get("seed", 0)),
        dapp_cap=int(sim["dapp_cap"]) if "dapp_cap" in sim else None,
        slice_cfg=slice_cfg,
        srs=srs,
        beam_check=beam_check,
        sweep_axis=sweep_raw.get("axis"),
        sweep_values=tuple(sweep_raw.get("values", []) or []),
    )


def load_scenario(path: str | Path) -> Scenario:
    """Read and parse a scenario file."""
    return loads(Path(path).read_text())


def validate_scenario(scenario: Scenario) -> ValidationReport:
    """Aggregate semantic validation across topology, catalog and intent."""
    report = ValidationReport()
    report.extend(validate_topology(scenario.topology))
    seen_app_ids: set[str] = set()
    for spec in scenario.catalog:
        if spec.id in seen_app_ids:
            report.add("duplicate-app-id", spec.id, "app id declared twice")
        seen_app_ids.add(spec.id)
        report.extend(validate_app(spec))
    task_ids = set()
    for task in scenario.intent.tasks:
        task_ids.add(task.id)
        for node_id in task.scope:
            if not scenario.topology.has_node(node_id):
                report.add(
                    "unknown-scope-node",
                    task.id,
                    f"scope references unknown node '{node_id}'",
                )
    for subject in scenario.priorities:
        if subject not in task_ids:
            report.add(
                "unknown-priority-subject",
                subject,
                "priorities must rank app instances (task ids)",
            )
    if scenario.slice_cfg is not None:
        try:
            scenario.slice_cfg.validate()
        except ValueError as exc:
            report.add("bad-slice-config", "simulation.slice", str(exc))
    if scenario.srs is not None:
        try:
            scenario.srs.validate()
        except ValueError as exc:
            report.add("bad-srs-config", "sweep.srs", str(exc))
    if scenario.beam_check is not None:
        bc = scenario.beam_check
        for node_id in (bc.src, bc.dst):
            if not scenario.topology.has_node(node_id):
                report.add(
                    "unknown-node", "sweep.beam_check", f"unknown node '{node_id}'"
                )
        if bc.required_soundings < 1:
            report.add(
                "bad-beam-check", "sweep.beam_check", "required_soundings must be >= 1"
            )
        if bc.deadline_us <= 0:
            report.add("bad-beam-check", "sweep.beam_check", "deadline_us must be > 0")
    return report


def bundled_scenario_path(name: str) -> Path:
    """Filesystem path of a scenario shipped with the package."""
    return Path(str(resources.files("dappsim").joinpath(f"scenarios/{name}.yaml")))


def bundled_scenario_names() -> list[str]:
    root = resources.files("dappsim").joinpath("scenarios")
    return sorted(p.name[: -len(".yaml")] for p in root.iterdir() if p.name.endswith(".yaml"))
