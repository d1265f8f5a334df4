"""Application descriptors: what an rApp/xApp/dApp consumes, controls and costs.

Apps are workload descriptors, not executable code; inference latency is a
declared constant supplied by the scenario author.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .kinds import DATA_PRODUCER, AppKind, DataKind, NodeKind
from .topology import ResourceVector
from .validation import ValidationReport

# Real-time loops run strictly below 10 ms. The 1 s near-RT upper edge
# follows the conventional loop taxonomy and is configurable here.
REAL_TIME_BOUND_US = 10_000
NEAR_RT_UPPER_US = 1_000_000


class NonPositivePeriodError(ValueError):
    pass


class TimescaleClass(Enum):
    REAL_TIME = "RealTime"
    NEAR_REAL_TIME = "NearRealTime"
    NON_REAL_TIME = "NonRealTime"


# Which loop class each app kind runs at.
APP_TIMESCALE: dict[AppKind, TimescaleClass] = {
    AppKind.DAPP: TimescaleClass.REAL_TIME,
    AppKind.XAPP: TimescaleClass.NEAR_REAL_TIME,
    AppKind.RAPP: TimescaleClass.NON_REAL_TIME,
}


def timescale_class(period_us: float) -> TimescaleClass:
    """Classify a control period: <10 ms real time, <1 s near real time,
    else non real time. The 10 ms edge itself counts as near real time."""
    if period_us <= 0:
        raise NonPositivePeriodError(f"control period must be > 0, got {period_us}")
    if period_us < REAL_TIME_BOUND_US:
        return TimescaleClass.REAL_TIME
    if period_us < NEAR_RT_UPPER_US:
        return TimescaleClass.NEAR_REAL_TIME
    return TimescaleClass.NON_REAL_TIME


def is_data_local(kind: DataKind, at: NodeKind) -> bool:
    """True when the node kind is where this data kind is produced."""
    return DATA_PRODUCER[kind] == at


@dataclass(frozen=True)
class ControlTarget:
    parameter: str
    controlled_at: NodeKind
    granularity_us: float

    @property
    def match_key(self) -> tuple[str, NodeKind]:
        return (self.parameter, self.controlled_at)


@dataclass(frozen=True)
class DataRequirement:
    kind: DataKind
    volume_bits_per_period: float
    freshness_deadline_us: float


@dataclass(frozen=True)
class AppSpec:
    id: str
    kind: AppKind
    control_period_us: float
    inference_latency_us: float
    footprint: ResourceVector = field(default_factory=ResourceVector)
    inputs: tuple[DataRequirement, ...] = ()
    controls: tuple[ControlTarget, ...] = ()

    def input_kinds(self) -> frozenset[DataKind]:
        return frozenset(r.kind for r in self.inputs)

    def requirement(self, kind: DataKind) -> DataRequirement:
        for r in self.inputs:
            if r.kind == kind:
                return r
        raise KeyError(kind)


def validate_app(spec: AppSpec) -> ValidationReport:
    """Report kind/timescale mismatches, control-without-input specs and
    nonpositive numeric fields."""
    report = ValidationReport()
    if spec.control_period_us <= 0:
        report.add(
            "nonpositive-field", spec.id, f"control_period_us={spec.control_period_us}"
        )
    else:
        expected = APP_TIMESCALE[spec.kind]
        actual = timescale_class(spec.control_period_us)
        if actual != expected:
            report.add(
                "kind-timescale-mismatch",
                spec.id,
                f"{spec.kind.value} requires a {expected.value} period, "
                f"{spec.control_period_us} us is {actual.value}",
            )
    if spec.inference_latency_us < 0:
        report.add(
            "nonpositive-field",
            spec.id,
            f"inference_latency_us={spec.inference_latency_us}",
        )
    if not spec.footprint.nonnegative:
        report.add("nonpositive-field", spec.id, f"footprint {spec.footprint}")
    if spec.controls and not spec.inputs:
        report.add(
            "controls-without-inputs",
            spec.id,
            "an app with control targets must declare input data",
        )
    seen_kinds: set[DataKind] = set()
    for req in spec.inputs:
        if req.volume_bits_per_period <= 0:
            report.add(
                "nonpositive-field",
                spec.id,
                f"{req.kind.value} volume_bits_per_period={req.volume_bits_per_period}",
            )
        if req.freshness_deadline_us <= 0:
            report.add(
                "nonpositive-field",
                spec.id,
                f"{req.kind.value} freshness_deadline_us={req.freshness_deadline_us}",
            )
        if req.kind in seen_kinds:
            report.add(
                "duplicate-input", spec.id, f"{req.kind.value} declared twice"
            )
        seen_kinds.add(req.kind)
    for target in spec.controls:
        if target.granularity_us <= 0:
            report.add(
                "nonpositive-field",
                spec.id,
                f"{target.parameter} granularity_us={target.granularity_us}",
            )
    return report
