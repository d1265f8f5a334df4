"""dappsim: where should RAN intelligence run?

A small analytical library plus deterministic discrete-event simulator for
placing rApps/xApps/dApps over a disaggregated RAN under real-time
deadlines, interface overhead, resource limits and conflict constraints.
"""

from .apps import (
    AppSpec,
    ControlTarget,
    DataRequirement,
    TimescaleClass,
    is_data_local,
    timescale_class,
    validate_app,
)
from .conflicts import (
    ConflictKind,
    ConflictRecord,
    ControlAction,
    KpmSample,
    Veto,
    detect_direct,
    detect_implicit,
    resolve,
)
from .kinds import AppKind, DataKind, InterfaceKind, NodeKind
from .orchestrator import (
    Assignment,
    InfeasiblePlacementError,
    Intent,
    PlacementPlan,
    TaskRequest,
    candidate_nodes,
    describe_plan,
    parse_intent,
    place,
    split_xapp,
)
from .overhead import (
    FeasibilityBreakdown,
    SrsConfig,
    TrafficLedger,
    beam_mgmt_feasible,
    e2_traffic,
    srs_data_rate,
    srs_payload_bits,
    transfer_latency,
)
from .scenario import (
    Scenario,
    ScenarioParseError,
    bundled_scenario_names,
    bundled_scenario_path,
    load_scenario,
    validate_scenario,
)
from .simulator import (
    Event,
    EventKind,
    MetricsReport,
    SchedulerKind,
    SliceConfig,
    SweepRow,
    run,
    sweep,
    trace,
    urllc_latency,
)
from .topology import (
    Link,
    Node,
    ResourceVector,
    Topology,
    path_latency,
    remaining_capacity,
    validate_topology,
)

__version__ = "0.1.0"
