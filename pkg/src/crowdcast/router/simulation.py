"""Trace-driven replay of opportunistic forwarding."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from itertools import groupby
from typing import Iterable, Protocol, Sequence

from ..clusters import ClusterParams, ClusterTracker
from ..trace import ContactEvent, Trace

log = logging.getLogger(__name__)


class ProtocolError(RuntimeError):
    """A forwarding protocol asked for an illegal replication."""


class WorkloadError(ValueError):
    pass


@dataclass
class Message:
    id: str
    source: str
    destination: str
    t_s: int
    t_v: int
    holders: set[str] = field(default_factory=set)
    delivered_at: int | None = None
    # replications before first delivery (the overhead measure), and all of them
    copies_created: int = 0
    copies_total: int = 0

    def __post_init__(self):
        if self.source == self.destination:
            raise ValueError(f"message {self.id} has the same source and destination")
        if not self.t_s < self.t_v:
            raise ValueError(f"message {self.id}: generation time must precede expiry")
        if not self.holders:
            self.holders = {self.source}

    @property
    def ttl(self) -> int:
        return self.t_v - self.t_s

    def fresh(self) -> "Message":
        return Message(self.id, self.source, self.destination, self.t_s, self.t_v)

    def live(self, t: float) -> bool:
        return self.t_s <= t <= self.t_v


def workload_hash(messages: Iterable[Message]) -> str:
    h = hashlib.sha256()
    for m in messages:
        h.update(f"{m.id},{m.source},{m.destination},{m.t_s},{m.t_v}\n".encode())
    return h.hexdigest()[:16]


@dataclass
class Network:
    """Simulation state visible to protocols."""

    tracker: ClusterTracker
    now: int = 0


class ForwardingProtocol(Protocol):
    name: str

    def on_contact(
        self, a: str, b: str, t: int, carried: Sequence[Message], net: Network
    ) -> list[tuple[Message, str, str]]: ...


@dataclass
class SimReport:
    protocol: str
    seed: int
    ttl: int | None
    messages: list[Message]
    workload: str = ""

    @property
    def generated(self) -> int:
        return len(self.messages)

    @property
    def delivered(self) -> int:
        return sum(m.delivered_at is not None for m in self.messages)

    @property
    def delivery_ratio(self) -> float:
        return self.delivered / self.generated if self.messages else 0.0

    @property
    def overhead(self) -> int:
        return sum(m.copies_created for m in self.messages)

    @property
    def total_copies(self) -> int:
        return sum(m.copies_total for m in self.messages)


def _apply(m: Message, frm: str, to: str, ev: ContactEvent, t: int) -> None:
    if not ev.involves(frm) or ev.other(frm) != to:
        raise ProtocolError(f"{m.id}: replication {frm}->{to} is not along contact {ev.pair}")
    if frm not in m.holders:
        raise ProtocolError(f"{m.id}: {frm} does not hold the message")
    if to in m.holders:
        raise ProtocolError(f"{m.id}: {to} already holds the message")
    if t > m.t_v:
        raise ProtocolError(f"{m.id}: message expired at {m.t_v}, now {t}")
    m.holders.add(to)
    m.copies_total += 1
    if m.delivered_at is None:
        m.copies_created += 1
        if to == m.destination:
            m.delivered_at = t


def run_simulation(
    trace: Trace,
    protocol: ForwardingProtocol,
    workload: Sequence[Message],
    seed: int = 0,
    params: ClusterParams | None = None,
    ttl: int | None = None,
) -> SimReport:
    """Replay ``trace`` and let ``protocol`` replicate ``workload`` at each contact.

    Contacts are point events at their start. Contacts sharing a start time
    form one round: clusters update for the whole round, then forwarding is
    repeated over the round until no replication happens, so same-instant
    chains are honoured. ``seed`` is recorded only; the replay itself is
    deterministic.
    """
    hi = trace.horizon[1]
    for m in workload:
        # trace times count from the trace epoch, so anything in [0, last contact end] can still move
        if m.t_s < 0 or (trace.events and m.t_s > hi):
            raise WorkloadError(f"message {m.id} generated at {m.t_s}, outside trace span (0, {hi})")
    messages = sorted((m.fresh() for m in workload), key=lambda m: (m.t_s, m.id))
    tracker = ClusterTracker(trace.nodes, params)
    net = Network(tracker)
    pending = 0
    live: list[Message] = []

    for t, group in groupby(trace.events, key=lambda e: e.start):
        group = list(group)
        net.now = t
        for ev in group:
            tracker.observe(ev)
        while pending < len(messages) and messages[pending].t_s <= t:
            live.append(messages[pending])
            pending += 1
        live = [m for m in live if t <= m.t_v]
        if not live:
            continue
        changed = True
        while changed:
            changed = False
            for ev in group:
                a, b = ev.node_a, ev.node_b
                carried = [m for m in live if (a in m.holders) != (b in m.holders)]
                if not carried:
                    continue
                for m, frm, to in protocol.on_contact(a, b, t, carried, net):
                    _apply(m, frm, to, ev, t)
                    changed = True
    report = SimReport(getattr(protocol, "name", type(protocol).__name__), seed, ttl, messages, workload_hash(messages))
    log.info(
        "%s: delivered %d/%d, overhead %d", report.protocol, report.delivered, report.generated, report.overhead
    )
    return report
