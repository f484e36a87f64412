"""Forwarding protocols: Epidemic, transient-cluster metric (TCD) and Bubble Rap."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from ..clusters import ClusterParams, DurationTable, fit_duration_table
from ..ict import DEFAULT_MIN_SAMPLES, IctTable, fit_ict_table
from ..metric import MetricContext, QuadratureOptions, forwarding_metric
from ..trace import Trace
from .simulation import Message, Network
from .social import (
    DEFAULT_EDGE_THRESHOLD,
    DEFAULT_K,
    aggregate_graph,
    kclique_communities,
    local_centralities,
    node_centrality,
)

Action = tuple[Message, str, str]


def _holder_and_peer(m: Message, a: str, b: str) -> tuple[str, str]:
    return (a, b) if a in m.holders else (b, a)


class EpidemicProtocol:
    name = "epidemic"

    def on_contact(self, a: str, b: str, t: int, carried: Sequence[Message], net: Network) -> list[Action]:
        actions = []
        for m in carried:
            if t > m.t_v:
                continue
            holder, peer = _holder_and_peer(m, a, b)
            actions.append((m, holder, peer))
        return actions


def epidemic_protocol() -> EpidemicProtocol:
    return EpidemicProtocol()


@dataclass
class TcdProtocol:
    """Replicate to a peer whose forwarding metric strictly beats the holder's."""

    params: ClusterParams
    ict_table: IctTable
    durations: DurationTable
    options: QuadratureOptions = QuadratureOptions()
    name: str = "tcd"
    _cache: dict = field(default_factory=dict, repr=False)
    _cache_t: int | None = field(default=None, repr=False)

    def metric(self, node: str, m: Message, t: int, net: Network) -> float:
        if node == m.destination:
            return 1.0
        if t >= m.t_v:
            return 0.0
        if self._cache_t != t:
            self._cache.clear()
            self._cache_t = t
        key = (node, m.id)
        if key not in self._cache:
            ctx = MetricContext(
                i=node,
                d=m.destination,
                t_e=t,
                t_v=m.t_v,
                t_s=m.t_s,
                view=net.tracker.view(node, t),
                ict_table=self.ict_table,
                durations=self.durations,
                options=self.options,
            )
            self._cache[key] = forwarding_metric(ctx)
        return self._cache[key]

    def on_contact(self, a: str, b: str, t: int, carried: Sequence[Message], net: Network) -> list[Action]:
        actions = []
        for m in carried:
            if t > m.t_v:
                continue
            holder, peer = _holder_and_peer(m, a, b)
            if peer == m.destination:
                actions.append((m, holder, peer))
                continue
            peer_metric = self.metric(peer, m, t, net)
            if peer_metric > 0 and peer_metric > self.metric(holder, m, t, net):
                actions.append((m, holder, peer))
        return actions


def train_tcd(
    trace: Trace,
    cutoff: float,
    params: ClusterParams | None = None,
    min_samples: int = DEFAULT_MIN_SAMPLES,
) -> tuple[IctTable, DurationTable]:
    """Fit ICT and cluster-duration tables on the contacts that started by ``cutoff``."""
    params = params or ClusterParams()
    prefix = trace.until(cutoff)
    return fit_ict_table(prefix, min_samples), fit_duration_table(prefix, params, cutoff=cutoff)


def tcd_protocol(
    params: ClusterParams,
    ict_table: IctTable,
    duration_model: DurationTable,
    combine_rule: str = "noisy-or",
    quadrature_n: int = 256,
    max_relays: int = 8,
) -> TcdProtocol:
    return TcdProtocol(params, ict_table, duration_model, QuadratureOptions(quadrature_n, combine_rule, max_relays))


@dataclass
class BubbleRapProtocol:
    """Climb global centrality until the destination's community, then local centrality inside it."""

    communities: list[frozenset[str]]
    global_centrality: dict[str, float]
    local_centrality: list[dict[str, float]]
    name: str = "bubblerap"

    def _local(self, node: str, dest_comms: list[int]) -> float:
        return max((self.local_centrality[c].get(node, 0.0) for c in dest_comms if node in self.communities[c]),
                   default=0.0)

    def on_contact(self, a: str, b: str, t: int, carried: Sequence[Message], net: Network) -> list[Action]:
        actions = []
        for m in carried:
            if t > m.t_v:
                continue
            holder, peer = _holder_and_peer(m, a, b)
            if peer == m.destination:
                actions.append((m, holder, peer))
                continue
            dest_comms = [k for k, c in enumerate(self.communities) if m.destination in c]
            holder_in = any(holder in self.communities[k] for k in dest_comms)
            peer_in = any(peer in self.communities[k] for k in dest_comms)
            if holder_in:
                forward = peer_in and self._local(peer, dest_comms) > self._local(holder, dest_comms)
            else:
                forward = peer_in or (
                    self.global_centrality.get(peer, 0.0) > self.global_centrality.get(holder, 0.0)
                )
            if forward:
                actions.append((m, holder, peer))
        return actions


def bubblerap_protocol(
    communities: list[frozenset[str]],
    global_centrality: dict[str, float],
    local_centrality: list[dict[str, float]],
) -> BubbleRapProtocol:
    if len(local_centrality) != len(communities):
        raise ValueError("one local centrality map is needed per community")
    return BubbleRapProtocol(list(communities), dict(global_centrality), list(local_centrality))


def train_bubblerap(
    trace: Trace, cutoff: float, k: int = DEFAULT_K, edge_threshold: float = DEFAULT_EDGE_THRESHOLD
) -> BubbleRapProtocol:
    graph = aggregate_graph(trace.until(cutoff), edge_threshold)
    communities = kclique_communities(graph, k)
    return bubblerap_protocol(
        communities, node_centrality(graph).betweenness, local_centralities(graph, communities)
    )
