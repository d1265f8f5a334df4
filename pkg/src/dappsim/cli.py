"""Command-line entry point: validate, place, simulate and sweep scenarios.

Exit codes: 0 success, 1 semantic violation or infeasibility, 2 parse or
schema error. CSV output has fixed column order and formatting so reports
can be diffed across runs.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .orchestrator import InfeasiblePlacementError, describe_plan, place
from .overhead import beam_mgmt_feasible, srs_data_rate, srs_payload_bits
from .scenario import Scenario, ScenarioParseError, load_scenario, validate_scenario
from .simulator import (
    InvalidScenarioError,
    MetricsReport,
    SchedulerKind,
    SliceConfig,
    UnknownAxisError,
    sweep,
    urllc_latency,
)
from .topology import NoPathError, chain_path

OUT_DIR_ENV = "DAPPSIM_OUT_DIR"

FIG3_UE_COUNTS = (1, 10, 50, 100, 200)
FIG3_PERIODS = (5, 10, 20)
FIG4_CAPS = (0, 2, 8)
FIG5_SHARES = tuple(round(0.05 * i, 2) for i in range(21))


class UnknownFigureError(ValueError):
    pass


def _fmt(value: object) -> str:
    """Stable cell formatting: ints plain, floats trimmed to <= 6 decimals."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        text = f"{value:.6f}".rstrip("0").rstrip(".")
        return text if text else "0"
    return str(value)


def _csv(rows: list[list[object]]) -> str:
    out = io.StringIO()
    for row in rows:
        out.write(",".join(_fmt(cell) for cell in row))
        out.write("\n")
    return out.getvalue()


def _resolve_out(out: str | None) -> Path | None:
    if out is None:
        return None
    path = Path(out)
    base = os.environ.get(OUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    return path


def _write(text: str, out: str | None) -> None:
    path = _resolve_out(out)
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def _load(path: str) -> Scenario:
    return load_scenario(path)


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        scenario = _load(args.scenario)
    except (ScenarioParseError, OSError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    report = validate_scenario(scenario)
    for violation in report:
        print(str(violation), file=sys.stderr)
    if not report.ok:
        return 1
    print(f"{args.scenario}: ok", file=sys.stderr)
    return 0


def _place_checked(scenario: Scenario, cap: int | None):
    report = validate_scenario(scenario)
    if not report.ok:
        raise InvalidScenarioError("; ".join(str(v) for v in report))
    return place(scenario.intent, scenario.topology, scenario.catalog, cap)


def cmd_place(args: argparse.Namespace) -> int:
    try:
        scenario = _load(args.scenario)
    except (ScenarioParseError, OSError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    try:
        plan = _place_checked(scenario, scenario.dapp_cap)
    except InfeasiblePlacementError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 1
    except InvalidScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return 1
    payload = describe_plan(plan, scenario.topology)
    _write(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.out)
    return 0


def _report_csv(report: MetricsReport) -> str:
    latencies = report.loop_latency_us
    rows: list[list[object]] = [
        ["metric", "value", "unit"],
        ["e2_bits_total", report.e2_bits_total, "bits"],
        ["fronthaul_bits_total", report.fronthaul_bits_total, "bits"],
        ["loops_completed", report.loops_completed, "count"],
        ["loop_latency_mean_us", report.loop_latency_mean_us, "us"],
        ["loop_latency_max_us", max(latencies) if latencies else None, "us"],
        ["deadline_violations", report.deadline_violations, "count"],
        ["urllc_latency_ms", report.urllc_latency_ms, "ms"],
        ["conflicts", len(report.conflicts), "count"],
        ["duration_us", report.duration_us, "us"],
        ["seed", report.seed, ""],
    ]
    return _csv(rows)


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        scenario = _load(args.scenario)
    except (ScenarioParseError, OSError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    try:
        plan = _place_checked(scenario, scenario.dapp_cap)
        from .simulator import run

        report = run(
            scenario.topology,
            scenario.catalog,
            plan,
            scenario.duration_us,
            scenario.seed,
            scenario.slice_cfg,
        )
    except (InfeasiblePlacementError, InvalidScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.format == "json":
        _write(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", args.out)
    else:
        _write(_report_csv(report), args.out)
    return 0


def _fig3_table(scenario: Scenario) -> str:
    if scenario.srs is None or scenario.beam_check is None:
        raise InvalidScenarioError("fig3 needs sweep.srs and sweep.beam_check sections")
    bc = scenario.beam_check
    try:
        path = chain_path(scenario.topology, bc.src, bc.dst, bc.interfaces)
    except NoPathError as exc:
        raise InvalidScenarioError(str(exc)) from exc
    rows: list[list[object]] = [
        [
            "sounding_period_slots",
            "num_ues",
            "payload_bits_per_ue",
            "per_ue_rate_mbps",
            "aggregate_rate_mbps",
            "accumulation_us",
            "transfer_us",
            "total_us",
            "meets_deadline",
        ]
    ]
    for period in FIG3_PERIODS:
        for ues in FIG3_UE_COUNTS:
            cfg = replace(scenario.srs, sounding_period_slots=period, num_ues=ues)
            per_ue = srs_data_rate(replace(cfg, num_ues=1))
            verdict = beam_mgmt_feasible(cfg, bc.required_soundings, path, bc.deadline_us)
            rows.append(
                [
                    period,
                    ues,
                    srs_payload_bits(cfg),
                    per_ue / 1e6,
                    srs_data_rate(cfg) / 1e6,
                    verdict.accumulation_us,
                    verdict.transfer_us,
                    verdict.total_us,
                    verdict.feasible,
                ]
            )
    return _csv(rows)


def _fig4_table(scenario: Scenario) -> str:
    task_count = len(scenario.intent.tasks)
    if task_count == 0:
        raise InvalidScenarioError("fig4 needs an intent with tasks")
    from .orchestrator import Intent

    columns: dict[int, list[float]] = {}
    for cap in FIG4_CAPS:
        per_cap: list[float] = []
        for k in range(1, task_count + 1):
            intent = Intent(id=scenario.intent.id, tasks=scenario.intent.tasks[:k])
            plan = place(intent, scenario.topology, scenario.catalog, cap)
            per_cap.append(plan.objective_bps)
        columns[cap] = per_cap
    rows: list[list[object]] = [
        ["app_count"] + [f"e2_bps_cap{cap}" for cap in FIG4_CAPS]
    ]
    for idx in range(task_count):
        rows.append([idx + 1] + [columns[cap][idx] for cap in FIG4_CAPS])
    return _csv(rows)


def _fig5_table(scenario: Scenario) -> str:
    del scenario  # the latency tables are model constants
    rows: list[list[object]] = [["urllc_prb_share", "latency_rr_ms", "latency_pf_ms"]]
    for share in FIG5_SHARES:
        rows.append(
            [
                share,
                urllc_latency(SliceConfig(share, SchedulerKind.ROUND_ROBIN)),
                urllc_latency(SliceConfig(share, SchedulerKind.PROPORTIONAL_FAIR)),
            ]
        )
    return _csv(rows)


def _axis_table(scenario: Scenario, axis: str, values: list[float]) -> str:
    rows: list[list[object]] = [
        [
            "axis",
            "value",
            "e2_bits_total",
            "fronthaul_bits_total",
            "loops_completed",
            "loop_latency_mean_us",
            "deadline_violations",
            "urllc_latency_ms",
            "srs_data_rate_bps",
        ]
    ]
    for row in sweep(axis, values, scenario):
        report = row.report
        rows.append(
            [
                axis,
                row.value,
                report.e2_bits_total,
                report.fronthaul_bits_total,
                report.loops_completed,
                report.loop_latency_mean_us,
                report.deadline_violations,
                report.urllc_latency_ms,
                row.srs_data_rate_bps,
            ]
        )
    return _csv(rows)


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        scenario = _load(args.scenario)
    except (ScenarioParseError, OSError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    try:
        if args.figure is not None:
            if args.figure == "fig3":
                table = _fig3_table(scenario)
            elif args.figure == "fig4":
                table = _fig4_table(scenario)
            elif args.figure == "fig5":
                table = _fig5_table(scenario)
            else:
                raise UnknownFigureError(args.figure)
        else:
            axis = args.axis or scenario.sweep_axis
            if axis is None:
                print("error: no --axis given and scenario has no sweep.axis",
                      file=sys.stderr)
                return 1
            if args.values is not None:
                values = [float(v) for v in args.values.split(",") if v != ""]
            else:
                values = list(scenario.sweep_values)
            table = _axis_table(scenario, axis, values)
    except (
        InvalidScenarioError,
        InfeasiblePlacementError,
        UnknownAxisError,
        UnknownFigureError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _write(table, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dappsim",
        description="Placement, overhead and control-loop analysis for "
        "rApps/xApps/dApps over a disaggregated RAN.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="schema + semantic checks")
    p_validate.add_argument("scenario")
    p_validate.set_defaults(func=cmd_validate)

    p_place = sub.add_parser("place", help="solve placement, print plan JSON")
    p_place.add_argument("scenario")
    p_place.add_argument("--out", default=None)
    p_place.set_defaults(func=cmd_place)

    p_sim = sub.add_parser("simulate", help="run the event simulation")
    p_sim.add_argument("scenario")
    p_sim.add_argument("--format", choices=("csv", "json"), default="csv")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--out", default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="parameter sweeps and figure tables")
    p_sweep.add_argument("scenario")
    group = p_sweep.add_mutually_exclusive_group()
    group.add_argument("--figure", choices=("fig3", "fig4", "fig5"), default=None)
    group.add_argument("--axis", default=None)
    p_sweep.add_argument("--values", default=None, help="comma-separated axis values")
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--out", default=None)
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
