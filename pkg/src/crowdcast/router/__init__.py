from .journeys import time_respecting_reachable
from .protocols import (
    BubbleRapProtocol,
    EpidemicProtocol,
    TcdProtocol,
    bubblerap_protocol,
    epidemic_protocol,
    tcd_protocol,
    train_bubblerap,
    train_tcd,
)
from .simulation import Message, Network, ProtocolError, SimReport, WorkloadError, run_simulation, workload_hash
from .social import aggregate_graph, kclique_communities, local_centralities, node_centrality
from .workload import generate_workload

__all__ = [
    "BubbleRapProtocol",
    "EpidemicProtocol",
    "Message",
    "Network",
    "ProtocolError",
    "SimReport",
    "TcdProtocol",
    "WorkloadError",
    "aggregate_graph",
    "bubblerap_protocol",
    "epidemic_protocol",
    "generate_workload",
    "kclique_communities",
    "local_centralities",
    "node_centrality",
    "run_simulation",
    "tcd_protocol",
    "time_respecting_reachable",
    "train_bubblerap",
    "train_tcd",
    "workload_hash",
]
