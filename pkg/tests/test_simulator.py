import json
import math
import random
from dataclasses import replace

import pytest

from dappsim.kinds import AppKind, DataKind, InterfaceKind
from dappsim.overhead import e2_traffic, transfer_latency
from dappsim.scenario import bundled_scenario_path, load_scenario
from dappsim.simulator import (
    EventKind,
    InvalidScenarioError,
    MetricsReport,
    SchedulerKind,
    SliceConfig,
    UnknownAxisError,
    run,
    sweep,
    trace,
    urllc_latency,
)
from dappsim.topology import Link
from support import make_app, manual_assignment, plan_of, small_topology


def local_dapp_plan(topo, inference_us=500.0, period_us=1_000.0):
    spec = make_app(
        "local-d",
        AppKind.DAPP,
        period_us,
        [(DataKind.DU_KPM, 1_000, 10_000)],
        inference_us=inference_us,
    )
    return plan_of(topo, manual_assignment(topo, "t1", "du1", spec, ("du1",))), spec


def remote_xapp_plan(topo, volume=100_000.0, period_us=10_000.0, inference_us=500.0):
    spec = make_app(
        "remote-x",
        AppKind.XAPP,
        period_us,
        [(DataKind.DU_KPM, volume, 200_000)],
        inference_us=inference_us,
    )
    return plan_of(topo, manual_assignment(topo, "t1", "ric", spec, ("du1",))), spec


class TestRun:
    def test_local_dapp_no_e2_no_violations(self):
        topo = small_topology()
        plan, spec = local_dapp_plan(topo)
        report = run(topo, [spec], plan, duration_us=10_000)
        assert report.e2_bits_total == 0.0
        assert report.deadline_violations == 0
        assert report.loops_completed == 10
        assert all(l == 500.0 for l in report.loop_latency_us)

    def test_remote_xapp_matches_closed_form(self):
        topo = small_topology()
        volume, inference = 100_000.0, 500.0
        plan, spec = remote_xapp_plan(topo, volume=volume, inference_us=inference)
        report = run(topo, [spec], plan, duration_us=100_000)
        path = [l for l in topo.links if l.key == "du1->ric:E2"]
        expected_latency = transfer_latency(volume, path) + inference
        assert report.loops_completed == 10
        assert all(
            l == pytest.approx(expected_latency) for l in report.loop_latency_us
        )
        assert report.e2_bits_total == pytest.approx(volume * 10)

    def test_identical_runs_are_identical(self):
        topo = small_topology()
        plan, spec = remote_xapp_plan(topo)
        a = run(topo, [spec], plan, duration_us=50_000, seed=9)
        b = run(topo, [spec], plan, duration_us=50_000, seed=9)
        assert a.to_dict() == b.to_dict()
        assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(
            b.to_dict(), sort_keys=True
        )

    def test_work_conservation_without_violations(self):
        topo = small_topology()
        fast = make_app(
            "fast", AppKind.DAPP, 1_000, [(DataKind.DU_KPM, 100, 5_000)], inference_us=100
        )
        slow = make_app(
            "slow",
            AppKind.XAPP,
            25_000,
            [(DataKind.DU_KPM, 1_000, 50_000)],
            inference_us=100,
        )
        plan = plan_of(
            topo,
            manual_assignment(topo, "tf", "du1", fast, ("du1",)),
            manual_assignment(topo, "ts", "ric", slow, ("du1",)),
        )
        duration = 100_000
        report = run(topo, [fast, slow], plan, duration_us=duration)
        assert report.deadline_violations == 0
        expected = math.floor(duration / 1_000) + math.floor(duration / 25_000)
        assert report.loops_completed == expected

    def test_slow_inference_stalls_and_counts_violations(self):
        topo = small_topology()
        plan, spec = local_dapp_plan(topo, inference_us=1_500.0, period_us=1_000.0)
        report = run(topo, [spec], plan, duration_us=10_000)
        # each loop takes 1.5 periods -> next production slips to the 2nd
        # boundary; starts at 0,2000,...,8000 and finishes inside horizon
        assert report.loops_completed == 5
        assert report.deadline_violations == 5
        assert all(l == 1_500.0 for l in report.loop_latency_us)

    def test_e2_bits_conserved_against_analytic_rate(self):
        topo = small_topology(num_dus=2)
        specs = []
        assignments = []
        for i, du in enumerate(("du1", "du2")):
            spec = make_app(
                f"x{i}",
                AppKind.XAPP,
                20_000,
                [(DataKind.DU_KPM, 40_000, 100_000)],
            )
            specs.append(spec)
            assignments.append(manual_assignment(topo, f"t{i}", "ric", spec, (du,)))
        plan = plan_of(topo, *assignments)
        duration = 200_000
        report = run(topo, specs, plan, duration_us=duration)
        rate = e2_traffic(plan, specs, topo).e2_bps
        per_period_volume = 40_000
        assert abs(report.e2_bits_total - rate * duration / 1e6) <= per_period_volume

    def test_direct_conflicts_rejected(self):
        topo = small_topology()
        spec = make_app(
            "c",
            AppKind.DAPP,
            1_000,
            [(DataKind.DU_KPM, 100, 5_000)],
            [("mcs", topo.node("du1").kind, 500)],
        )
        plan = plan_of(
            topo,
            manual_assignment(topo, "t1", "du1", spec, ("du1",)),
            manual_assignment(topo, "t2", "du1", spec, ("du1",)),
        )
        with pytest.raises(InvalidScenarioError):
            run(topo, [spec], plan, duration_us=10_000)

    def test_nonpositive_duration_rejected(self):
        topo = small_topology()
        plan, spec = local_dapp_plan(topo)
        with pytest.raises(InvalidScenarioError):
            run(topo, [spec], plan, duration_us=0)

    def test_e2_bits_equal_sum_of_completed_transfer_volumes(self):
        topo = small_topology()
        volume = 40_000.0
        plan, spec = remote_xapp_plan(topo, volume=volume, period_us=20_000)
        report, events = trace(topo, [spec], plan, duration_us=100_000)
        transfers = [e for e in events if e.kind == EventKind.TRANSFER_DONE]
        # single-hop single-consumer stream: one link crossing per delivery
        assert report.e2_bits_total == pytest.approx(len(transfers) * volume)

    def test_event_log_kinds_and_order(self):
        topo = small_topology()
        plan, spec = remote_xapp_plan(topo, period_us=50_000)
        report, events = trace(topo, [spec], plan, duration_us=100_000)
        kinds = [e.kind for e in events]
        assert kinds.count(EventKind.APP_DEPLOYED) == 1
        assert kinds.count(EventKind.APP_TERMINATED) == 1
        assert kinds.count(EventKind.CONTROL_APPLIED) == report.loops_completed
        times = [e.time_us for e in events]
        assert times == sorted(times)
        seqs = [e.seq for e in events]
        assert seqs == list(range(len(events)))


class TestUrllcLatency:
    def test_proportional_fair_wins_below_crossover(self):
        for share in [s / 100 for s in range(0, 30)]:
            pf = urllc_latency(SliceConfig(share, SchedulerKind.PROPORTIONAL_FAIR))
            rr = urllc_latency(SliceConfig(share, SchedulerKind.ROUND_ROBIN))
            assert pf < rr

    def test_round_robin_wins_at_and_above_crossover(self):
        for share in [s / 100 for s in range(30, 101)]:
            pf = urllc_latency(SliceConfig(share, SchedulerKind.PROPORTIONAL_FAIR))
            rr = urllc_latency(SliceConfig(share, SchedulerKind.ROUND_ROBIN))
            assert rr <= pf

    def test_crossover_knot_equality(self):
        pf = urllc_latency(SliceConfig(0.30, SchedulerKind.PROPORTIONAL_FAIR))
        rr = urllc_latency(SliceConfig(0.30, SchedulerKind.ROUND_ROBIN))
        assert pf == rr

    def test_round_robin_floor_is_four_ms(self):
        values = [
            urllc_latency(SliceConfig(s / 1000, SchedulerKind.ROUND_ROBIN))
            for s in range(0, 1001)
        ]
        assert min(values) == pytest.approx(4.0, abs=0.01)

    def test_share_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            urllc_latency(SliceConfig(1.5, SchedulerKind.ROUND_ROBIN))


@pytest.fixture(scope="module")
def fig4():
    return load_scenario(bundled_scenario_path("fig4"))


class TestSweep:
    def test_app_count_axis_capped_vs_uncapped(self, fig4):
        open_cap = replace(fig4, dapp_cap=8)
        closed_cap = replace(fig4, dapp_cap=0)
        values = list(range(1, 13))
        with_dapps = sweep("app_count", values, open_cap)
        without = sweep("app_count", values, closed_cap)
        e2_with = [r.report.e2_bits_total for r in with_dapps]
        e2_without = [r.report.e2_bits_total for r in without]
        assert e2_with == sorted(e2_with)  # monotone
        assert e2_without == sorted(e2_without)
        for a, b in zip(e2_with, e2_without):
            assert a <= b

    def test_sounding_period_axis_reports_srs_rate(self):
        from dappsim.overhead import SrsConfig, srs_data_rate

        fig3 = load_scenario(bundled_scenario_path("fig3"))
        rows = sweep("sounding_period", [5, 10, 20], fig3)
        for row in rows:
            expected = srs_data_rate(
                replace(fig3.srs, sounding_period_slots=int(row.value))
            )
            assert row.srs_data_rate_bps == pytest.approx(expected)

    def test_urllc_share_axis(self):
        fig5 = load_scenario(bundled_scenario_path("fig5"))
        rows = sweep("urllc_prb_share", [0.1, 0.5], fig5)
        assert [r.report.urllc_latency_ms for r in rows] == [22.0, 5.0]

    def test_empty_values_empty_table(self, fig4):
        assert sweep("app_count", [], fig4) == []

    def test_unknown_axis_rejected(self, fig4):
        with pytest.raises(UnknownAxisError):
            sweep("bandwidth", [1], fig4)


class TestReportSerialization:
    def test_round_trip(self):
        topo = small_topology()
        plan, spec = remote_xapp_plan(topo)
        report = run(topo, [spec], plan, duration_us=50_000, seed=3)
        again = MetricsReport.from_dict(json.loads(json.dumps(report.to_dict())))
        assert again.to_dict() == report.to_dict()
