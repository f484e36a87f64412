"""Transient cluster detection.

Every node keeps the set of peers whose latest inter-contact gap is within a
threshold ``x``. Peers exchange their member sets when they meet, which gives
each node a 2-hop view (its own cluster plus its members' clusters).
"""

from __future__ import annotations

import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .trace import ContactEvent, Trace, canonical_pair

DEFAULT_X = 3600
STD_FLOOR = 60.0
MIN_DURATION_SAMPLES = 5


@dataclass(frozen=True)
class ClusterParams:
    x: float = DEFAULT_X

    def __post_init__(self):
        if not self.x > 0:
            raise ValueError("cluster threshold x must be > 0")


@dataclass
class Snapshot:
    taken_at: float
    members: dict[str, float]  # member -> last contact end, as seen by the sender


@dataclass
class TransientClusterState:
    owner: str
    x: float = DEFAULT_X
    last_end: dict[str, float] = field(default_factory=dict)
    since: dict[str, float] = field(default_factory=dict)
    neighbor_snapshots: dict[str, Snapshot] = field(default_factory=dict)
    membership_log: dict[str, list[tuple[float, float]]] = field(default_factory=lambda: defaultdict(list))

    def is_member(self, node: str, t: float) -> bool:
        end = self.last_end.get(node)
        return end is not None and t - end <= self.x

    def members(self, t: float) -> dict[str, float]:
        return {m: end for m, end in self.last_end.items() if t - end <= self.x}

    def record_contact(self, peer: str, start: float, end: float) -> None:
        if peer == self.owner:
            raise ValueError("a node cannot contact itself")
        prev = self.last_end.get(peer)
        if prev is None or start - prev > self.x:
            if prev is not None:
                self.membership_log[peer].append((self.since[peer], prev + self.x))
                self.neighbor_snapshots.pop(peer, None)
            self.since[peer] = end
        self.last_end[peer] = max(end, prev) if prev is not None else end

    def intervals(self, peer: str, until: float | None = None) -> list[tuple[float, float]]:
        """Closed membership episodes of ``peer``, plus the current one.

        The current episode ends at ``last_end + x``; when ``until`` is given
        it is clipped there (and dropped if it had not started yet).
        """
        out = list(self.membership_log.get(peer, ()))
        if peer in self.since:
            enter, exit_ = self.since[peer], self.last_end[peer] + self.x
            if until is not None:
                exit_ = min(exit_, until)
            if exit_ >= enter:
                out.append((enter, exit_))
        return out


def observe_contact(
    state_i: TransientClusterState,
    state_j: TransientClusterState,
    event: ContactEvent,
    params: ClusterParams | None = None,
) -> None:
    """Update both owners' clusters for ``event`` and swap cluster snapshots.

    Membership is decided at contact start; the recorded encounter time is the
    contact end.
    """
    if {state_i.owner, state_j.owner} != {event.node_a, event.node_b}:
        raise ValueError(f"contact {event.pair} does not match owners {state_i.owner!r}, {state_j.owner!r}")
    if params is not None:
        state_i.x = state_j.x = params.x
    t = event.start
    state_i.record_contact(state_j.owner, t, event.end)
    state_j.record_contact(state_i.owner, t, event.end)
    state_i.neighbor_snapshots[state_j.owner] = Snapshot(t, state_j.members(t))
    state_j.neighbor_snapshots[state_i.owner] = Snapshot(t, state_i.members(t))


def members_at(state: TransientClusterState, t: float) -> set[str]:
    return set(state.members(t))


def two_hop_members_at(state: TransientClusterState, t: float) -> set[str]:
    view = members_at(state, t)
    out = set(view)
    for m in view:
        snap = state.neighbor_snapshots.get(m)
        if snap is not None:
            out.update(snap.members)
    out.discard(state.owner)
    return out


@dataclass(frozen=True)
class ClusterView:
    """Read-only picture of one node's cluster at time ``t``, as the metric consumes it."""

    owner: str
    t: float
    members: Mapping[str, float]  # member -> last contact end
    since: Mapping[str, float]  # member -> start of current co-membership
    snapshots: Mapping[str, Mapping[str, float]]  # member -> its members' last contact ends

    def two_hop(self) -> set[str]:
        out = set(self.members)
        for snap in self.snapshots.values():
            out.update(snap)
        out.discard(self.owner)
        return out

    def bridges_to(self, dest: str) -> list[str]:
        """Members (other than ``dest``) whose own cluster contains ``dest``."""
        return sorted(m for m, snap in self.snapshots.items() if m != dest and dest in snap)


def cluster_view(state: TransientClusterState, t: float) -> ClusterView:
    members = state.members(t)
    snapshots = {}
    for m in members:
        snap = state.neighbor_snapshots.get(m)
        if snap is not None:
            snapshots[m] = {k: v for k, v in snap.members.items() if k != m}
    return ClusterView(
        owner=state.owner,
        t=t,
        members=members,
        since={m: state.since[m] for m in members},
        snapshots=snapshots,
    )


class ClusterTracker:
    """All nodes' cluster states, driven by a time-ordered contact replay."""

    def __init__(self, nodes: Iterable[str], params: ClusterParams | None = None):
        self.params = params or ClusterParams()
        self.states = {n: TransientClusterState(n, self.params.x) for n in sorted(nodes)}

    def state(self, node: str) -> TransientClusterState:
        if node not in self.states:
            self.states[node] = TransientClusterState(node, self.params.x)
        return self.states[node]

    def observe(self, event: ContactEvent) -> None:
        observe_contact(self.state(event.node_a), self.state(event.node_b), event)

    def view(self, node: str, t: float) -> ClusterView:
        return cluster_view(self.state(node), t)


def co_membership_intervals(
    trace: Trace, i: str, d: str, params: ClusterParams | None = None
) -> list[tuple[float, float]]:
    """Maximal intervals during which ``d`` is in ``i``'s cluster over the whole trace.

    An episode is dated from the end of the contact that opens it and lasts
    until ``x`` after the last contact end that keeps the gap within ``x``.
    """
    x = (params or ClusterParams()).x
    out: list[tuple[float, float]] = []
    for ev in trace.pair_contacts(canonical_pair(i, d)):
        if out and ev.start - (out[-1][1] - x) <= x:
            out[-1] = (out[-1][0], max(out[-1][1], ev.end + x))
        else:
            out.append((ev.end, ev.end + x))
    return out


# -- cluster duration model (f_c) ----------------------------------------------


@dataclass(frozen=True)
class ClusterDurationModel:
    mean: float
    std: float
    sample_count: int = 0

    def __post_init__(self):
        if not self.mean > 0:
            raise ValueError("cluster duration mean must be > 0")
        if not self.std > 0:
            raise ValueError("cluster duration std must be > 0")


def default_duration_model(x: float = DEFAULT_X) -> ClusterDurationModel:
    return ClusterDurationModel(mean=float(x), std=x / 4, sample_count=0)


def fit_cluster_duration_model(
    samples: Sequence[float],
    fallback: ClusterDurationModel | None = None,
    x: float = DEFAULT_X,
    std_floor: float = STD_FLOOR,
    min_samples: int = MIN_DURATION_SAMPLES,
) -> ClusterDurationModel:
    """Normal fit of co-membership durations.

    Short histories (fewer than ``min_samples``) defer to ``fallback`` when one
    is given; otherwise they are fitted as-is. With no samples and no fallback
    the default model (mean ``x``, std ``x/4``) is returned.
    """
    n = len(samples)
    if n == 0:
        return fallback or default_duration_model(x)
    if n < min_samples and fallback is not None:
        return fallback
    mean = statistics.fmean(samples)
    std = statistics.stdev(samples) if n > 1 else 0.0
    return ClusterDurationModel(mean=mean, std=max(std, std_floor), sample_count=n)


@dataclass(frozen=True)
class DurationTable:
    models: Mapping[tuple[str, str], ClusterDurationModel]
    pooled: ClusterDurationModel

    def get(self, a: str, b: str) -> ClusterDurationModel:
        return self.models.get(canonical_pair(a, b), self.pooled)


def fit_duration_table(
    trace: Trace, params: ClusterParams | None = None, cutoff: float | None = None
) -> DurationTable:
    """Per-pair duration models from completed co-membership episodes.

    Episodes still open at ``cutoff`` (default: trace end) are censored and
    left out.
    """
    params = params or ClusterParams()
    cutoff = trace.horizon[1] if cutoff is None else cutoff
    per_pair = {}
    for pair in trace.pairs():
        durations = [b - a for a, b in co_membership_intervals(trace, *pair, params) if b <= cutoff]
        if durations:
            per_pair[pair] = durations
    pooled = fit_cluster_duration_model(
        [d for ds in per_pair.values() for d in ds], x=params.x
    )
    models = {pair: fit_cluster_duration_model(ds, fallback=pooled, x=params.x) for pair, ds in per_pair.items()}
    return DurationTable(models, pooled)


# -- statistics ------------------------------------------------------------------


@dataclass(frozen=True)
class ClusterStats:
    mean_size: float
    max_size: int
    mean_two_hop_size: float
    series: list[tuple[int, str, int, int]]  # (t, node, cluster_size, two_hop_size)

    def node_series(self, node: str) -> list[tuple[int, int]]:
        return [(t, size) for t, n, size, _ in self.series if n == node]


def cluster_stats(trace: Trace, params: ClusterParams | None = None, sampling_interval: int = 600) -> ClusterStats:
    """Replay ``trace`` and sample every node's cluster each ``sampling_interval`` seconds."""
    if sampling_interval <= 0:
        raise ValueError("sampling interval must be > 0")
    if not trace.events:
        return ClusterStats(0.0, 0, 0.0, [])
    tracker = ClusterTracker(trace.nodes, params)
    nodes = sorted(trace.nodes)
    events = trace.events
    k = 0
    series = []
    t0, t_end = trace.horizon
    for t in range(t0, t_end + 1, sampling_interval):
        while k < len(events) and events[k].start <= t:
            tracker.observe(events[k])
            k += 1
        for n in nodes:
            state = tracker.states[n]
            series.append((t, n, len(members_at(state, t)), len(two_hop_members_at(state, t))))
    sizes = [row[2] for row in series]
    return ClusterStats(
        mean_size=sum(sizes) / len(sizes),
        max_size=max(sizes),
        mean_two_hop_size=sum(row[3] for row in series) / len(series),
        series=series,
    )
