"""Aggregate contact graph, k-clique communities and centralities (Bubble Rap inputs)."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import networkx as nx
from networkx.algorithms.community import k_clique_communities

from ..trace import Trace

DEFAULT_K = 3
DEFAULT_EDGE_THRESHOLD = 1000


def aggregate_graph(trace: Trace, edge_threshold: float = DEFAULT_EDGE_THRESHOLD) -> nx.Graph:
    """Nodes of the trace, linked when their total contact duration reaches ``edge_threshold``."""
    total: dict[tuple[str, str], int] = defaultdict(int)
    for ev in trace.events:
        total[ev.pair] += ev.end - ev.start
    g = nx.Graph()
    g.add_nodes_from(sorted(trace.nodes))
    g.add_edges_from(sorted(pair for pair, dur in total.items() if dur >= edge_threshold))
    return g


def kclique_communities(graph: nx.Graph, k: int = DEFAULT_K) -> list[frozenset[str]]:
    """Clique-percolation communities, sorted for determinism. Nodes may overlap."""
    if k < 2:
        raise ValueError("k must be >= 2")
    comms = {frozenset(c) for c in k_clique_communities(graph, k)}
    return sorted(comms, key=lambda c: (-len(c), sorted(c)))


@dataclass(frozen=True)
class Centrality:
    betweenness: dict[str, float]
    degree: dict[str, float]


def node_centrality(graph: nx.Graph) -> Centrality:
    """Unweighted, unnormalized shortest-path betweenness (degree kept for diagnostics)."""
    if graph.number_of_nodes() == 0:
        return Centrality({}, {})
    betweenness = nx.betweenness_centrality(graph, normalized=False)
    degree = nx.degree_centrality(graph) if graph.number_of_nodes() > 1 else {n: 0.0 for n in graph}
    return Centrality(dict(sorted(betweenness.items())), dict(sorted(degree.items())))


def local_centralities(graph: nx.Graph, communities: list[frozenset[str]]) -> list[dict[str, float]]:
    return [node_centrality(graph.subgraph(c)).betweenness for c in communities]
