"""Shared enumerations for nodes, interfaces, data streams and app classes.

These are leaf definitions used by both the topology and the application
catalog; keeping them in one module avoids import cycles between the two.
"""

from __future__ import annotations

from enum import Enum


class NodeKind(str, Enum):
    """The five function kinds of a disaggregated RAN deployment.

    Service-management (SMO) functions are attributed to NON_RT_RIC.
    """

    RU = "RU"
    DU = "DU"
    CU = "CU"
    NEAR_RT_RIC = "NearRtRic"
    NON_RT_RIC = "NonRtRic"


class InterfaceKind(str, Enum):
    E2 = "E2"
    O1 = "O1"
    A1 = "A1"
    F1 = "F1"
    OPEN_FRONTHAUL = "OpenFronthaul"


class DataKind(str, Enum):
    """Input stream classes an application can subscribe to."""

    FREQ_DOMAIN_IQ = "FreqDomainIQ"
    TRANSPORT_BLOCKS = "TransportBlocks"
    RLC_PACKETS = "RlcPackets"
    PDCP_SDAP_DATA = "PdcpSdapData"
    DU_KPM = "DuKpm"
    CU_KPM = "CuKpm"
    AGGREGATE_KPM = "AggregateKpm"
    ENRICHMENT_INFO = "EnrichmentInfo"


class AppKind(str, Enum):
    RAPP = "rApp"
    XAPP = "xApp"
    DAPP = "dApp"


# Each data kind is produced by exactly one node kind; frequency-domain
# samples count as DU data (they arrive over the fronthaul and stay there).
DATA_PRODUCER: dict[DataKind, NodeKind] = {
    DataKind.FREQ_DOMAIN_IQ: NodeKind.DU,
    DataKind.TRANSPORT_BLOCKS: NodeKind.DU,
    DataKind.RLC_PACKETS: NodeKind.DU,
    DataKind.DU_KPM: NodeKind.DU,
    DataKind.PDCP_SDAP_DATA: NodeKind.CU,
    DataKind.CU_KPM: NodeKind.CU,
    DataKind.AGGREGATE_KPM: NodeKind.NEAR_RT_RIC,
    DataKind.ENRICHMENT_INFO: NodeKind.NEAR_RT_RIC,
}

# Which app class a node kind hosts; RUs host no applications.
HOSTED_APP_KIND: dict[NodeKind, AppKind | None] = {
    NodeKind.RU: None,
    NodeKind.DU: AppKind.DAPP,
    NodeKind.CU: AppKind.DAPP,
    NodeKind.NEAR_RT_RIC: AppKind.XAPP,
    NodeKind.NON_RT_RIC: AppKind.RAPP,
}
