"""Contact traces: parsing, normalization, summaries, ICT samples and synthesis."""

from __future__ import annotations

import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, TextIO

import numpy as np

FORMATS = ("csv", "crawdad")
CSV_HEADER = "node_a,node_b,start,end"
SECONDS_PER_DAY = 86400
MIN_CONTACT_DURATION = 1


class TraceFormatError(ValueError):
    """Raised when a trace source cannot be decoded."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def canonical_pair(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True, order=True)
class ContactEvent:
    start: int
    node_a: str
    node_b: str
    end: int

    def __post_init__(self):
        if self.node_a == self.node_b:
            raise ValueError(f"self-contact for node {self.node_a!r}")
        if self.start >= self.end:
            raise ValueError(f"contact start {self.start} must precede end {self.end}")
        if self.node_a > self.node_b:
            a, b = self.node_a, self.node_b
            object.__setattr__(self, "node_a", b)
            object.__setattr__(self, "node_b", a)

    @property
    def pair(self) -> tuple[str, str]:
        return (self.node_a, self.node_b)

    def involves(self, node: str) -> bool:
        return node == self.node_a or node == self.node_b

    def other(self, node: str) -> str:
        if node == self.node_a:
            return self.node_b
        if node == self.node_b:
            return self.node_a
        raise ValueError(f"{node!r} is not part of contact {self.pair}")


@dataclass(frozen=True)
class Trace:
    """Immutable, normalized contact trace.

    Events are sorted by ``(start, node_a, node_b)`` and contacts of the same
    pair never overlap. ``horizon`` is ``(first start, last end)``; an empty
    trace has horizon ``(0, 0)``.
    """

    events: tuple[ContactEvent, ...] = ()
    nodes: frozenset[str] = frozenset()
    horizon: tuple[int, int] = (0, 0)
    _by_pair: dict = field(default=None, repr=False, compare=False, hash=False)

    @classmethod
    def from_events(cls, events: Iterable[ContactEvent], nodes: Iterable[str] = ()) -> "Trace":
        merged = merge_contacts(events)
        all_nodes = set(nodes)
        for ev in merged:
            all_nodes.add(ev.node_a)
            all_nodes.add(ev.node_b)
        if merged:
            horizon = (min(e.start for e in merged), max(e.end for e in merged))
        else:
            horizon = (0, 0)
        return cls(tuple(merged), frozenset(all_nodes), horizon)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[ContactEvent]:
        return iter(self.events)

    @property
    def duration(self) -> int:
        return self.horizon[1] - self.horizon[0]

    def _pair_index(self) -> dict[tuple[str, str], tuple[ContactEvent, ...]]:
        if self._by_pair is None:
            grouped: dict[tuple[str, str], list[ContactEvent]] = defaultdict(list)
            for ev in self.events:
                grouped[ev.pair].append(ev)
            object.__setattr__(self, "_by_pair", {k: tuple(v) for k, v in grouped.items()})
        return self._by_pair

    def pair_contacts(self, pair: tuple[str, str]) -> tuple[ContactEvent, ...]:
        return self._pair_index().get(canonical_pair(*pair), ())

    def pairs(self) -> list[tuple[str, str]]:
        return sorted(self._pair_index())

    def until(self, t: float) -> "Trace":
        """Prefix of contacts that started at or before ``t``."""
        events = tuple(e for e in self.events if e.start <= t)
        horizon = (self.horizon[0], max((e.end for e in events), default=self.horizon[0]))
        return Trace(events, self.nodes, horizon)


def merge_contacts(events: Iterable[ContactEvent]) -> list[ContactEvent]:
    """Union overlapping (or touching) intervals of the same pair, then sort."""
    grouped: dict[tuple[str, str], list[ContactEvent]] = defaultdict(list)
    for ev in events:
        grouped[ev.pair].append(ev)
    out: list[ContactEvent] = []
    for (a, b), evs in grouped.items():
        evs.sort()
        cur_start, cur_end = evs[0].start, evs[0].end
        for ev in evs[1:]:
            if ev.start <= cur_end:
                cur_end = max(cur_end, ev.end)
            else:
                out.append(ContactEvent(cur_start, a, b, cur_end))
                cur_start, cur_end = ev.start, ev.end
        out.append(ContactEvent(cur_start, a, b, cur_end))
    out.sort()
    return out


def _parse_int(token: str, what: str, line: int) -> int:
    try:
        value = int(token)
    except ValueError:
        try:
            as_float = float(token)
        except ValueError:
            raise TraceFormatError(f"{what} {token!r} is not a number", line) from None
        if not as_float.is_integer():
            raise TraceFormatError(f"{what} {token!r} is not a whole number of seconds", line)
        value = int(as_float)
    if value < 0:
        raise TraceFormatError(f"{what} {token!r} is negative", line)
    return value


def parse_trace(source: TextIO | str, format: str = "csv") -> Trace:
    """Decode a contact trace.

    ``format="csv"`` expects a ``node_a,node_b,start,end`` header;
    ``format="crawdad"`` expects header-less whitespace-separated rows.
    Blank lines and ``#`` comments are skipped in both.
    """
    if format not in FORMATS:
        raise TraceFormatError(f"unknown trace format {format!r} (expected one of {', '.join(FORMATS)})")
    if isinstance(source, str):
        source = io.StringIO(source)

    events = []
    header_seen = False
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if format == "csv":
            if not header_seen:
                cols = [c.strip() for c in line.split(",")]
                if cols != CSV_HEADER.split(","):
                    raise TraceFormatError(f"expected header {CSV_HEADER!r}, got {line!r}", lineno)
                header_seen = True
                continue
            tokens = [c.strip() for c in line.split(",")]
        else:
            tokens = line.split()
        if len(tokens) != 4:
            raise TraceFormatError(f"expected 4 fields, got {len(tokens)}", lineno)
        a, b = tokens[0], tokens[1]
        if not a or not b:
            raise TraceFormatError("empty node identifier", lineno)
        if a == b:
            raise TraceFormatError(f"self-contact for node {a!r}", lineno)
        start = _parse_int(tokens[2], "start", lineno)
        end = _parse_int(tokens[3], "end", lineno)
        if start >= end:
            raise TraceFormatError(f"start {start} is not before end {end}", lineno)
        events.append(ContactEvent(start, a, b, end))
    return Trace.from_events(events)


def serialize_trace(trace: Trace, format: str = "csv") -> str:
    if format not in FORMATS:
        raise TraceFormatError(f"unknown trace format {format!r}")
    lines = [CSV_HEADER] if format == "csv" else []
    sep = "," if format == "csv" else " "
    for ev in trace.events:
        lines.append(sep.join((ev.node_a, ev.node_b, str(ev.start), str(ev.end))))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TraceSummary:
    node_count: int
    event_count: int
    duration_days: float
    pair_counts: dict[tuple[str, str], int]


def trace_summary(trace: Trace) -> TraceSummary:
    counts: dict[tuple[str, str], int] = defaultdict(int)
    for ev in trace.events:
        counts[ev.pair] += 1
    return TraceSummary(
        node_count=len(trace.nodes),
        event_count=len(trace.events),
        duration_days=trace.duration / SECONDS_PER_DAY,
        pair_counts=dict(sorted(counts.items())),
    )


def extract_pair_ict_samples(trace: Trace, pair: tuple[str, str]) -> list[int]:
    contacts = trace.pair_contacts(pair)
    return [nxt.start - prev.end for prev, nxt in zip(contacts, contacts[1:])]


# -- synthesis ---------------------------------------------------------------

ICT_FAMILIES = ("exponential", "pareto", "lognormal")


@dataclass(frozen=True)
class FamilySpec:
    """ICT family for synthesis; the mean comes from the configured rate.

    ``shape`` is the Pareto shape (must exceed 1 for a finite mean) or the
    log-normal log-std; it is ignored for the exponential family.
    """

    family: str = "exponential"
    shape: float = 1.5

    def __post_init__(self):
        if self.family not in ICT_FAMILIES:
            raise ValueError(f"unknown ICT family {self.family!r}")
        if self.family == "pareto" and self.shape <= 1:
            raise ValueError("pareto shape must exceed 1 for a rate-parameterized mean")
        if self.family == "lognormal" and self.shape <= 0:
            raise ValueError("lognormal log-std must be positive")

    def sample(self, rng: np.random.Generator, mean: float) -> float:
        if self.family == "exponential":
            return float(rng.exponential(mean))
        if self.family == "pareto":
            scale = mean * (self.shape - 1) / self.shape
            return float(scale * (1.0 + rng.pareto(self.shape)))
        mu = math.log(mean) - self.shape**2 / 2
        return float(rng.lognormal(mu, self.shape))


@dataclass(frozen=True)
class SyntheticTraceConfig:
    communities: tuple[int, ...] = (10, 10)
    intra_rate: float = 1 / 3600
    inter_rate: float = 1 / 86400
    intra_family: FamilySpec = FamilySpec()
    inter_family: FamilySpec = FamilySpec()
    contact_duration_mean: float = 300.0
    contact_duration_std: float = 100.0
    horizon: int = 3 * SECONDS_PER_DAY
    membership_switch_period: int = 0
    # Log-std of a per-pair lognormal rate multiplier (0 = homogeneous pairs).
    rate_heterogeneity: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if not self.communities or any(int(s) < 1 for s in self.communities):
            raise ValueError("community sizes must be >= 1")
        if self.intra_rate < 0 or self.inter_rate < 0:
            raise ValueError("contact rates must be >= 0")
        if self.horizon <= 0:
            raise ValueError("horizon must be > 0")
        if self.contact_duration_std < 0:
            raise ValueError("contact duration std must be >= 0")
        if self.contact_duration_mean <= 0:
            raise ValueError("contact duration mean must be > 0")
        if self.membership_switch_period < 0:
            raise ValueError("membership switch period must be >= 0")
        if self.rate_heterogeneity < 0:
            raise ValueError("rate heterogeneity must be >= 0")


def synthetic_node_names(cfg: SyntheticTraceConfig) -> list[str]:
    total = sum(cfg.communities)
    width = len(str(total - 1))
    return [f"n{k:0{width}d}" for k in range(total)]


def community_of(cfg: SyntheticTraceConfig, node_index: int, t: float) -> int:
    """Community of a node at time ``t``.

    With a switch period, every period shifts each node one slot along the
    global ordering, so one node per community boundary changes groups.
    """
    total = sum(cfg.communities)
    epoch = int(t // cfg.membership_switch_period) if cfg.membership_switch_period else 0
    slot = (node_index + epoch) % total
    bound = 0
    for c, size in enumerate(cfg.communities):
        bound += size
        if slot < bound:
            return c
    raise AssertionError("unreachable")


def generate_synthetic_trace(cfg: SyntheticTraceConfig) -> Trace:
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    names = synthetic_node_names(cfg)
    n = len(names)
    period = cfg.membership_switch_period
    events = []
    for a in range(n):
        for b in range(a + 1, n):
            mult = float(rng.lognormal(0.0, cfg.rate_heterogeneity)) if cfg.rate_heterogeneity else 1.0
            t = 0.0
            while t < cfg.horizon:
                same = community_of(cfg, a, t) == community_of(cfg, b, t)
                rate = (cfg.intra_rate if same else cfg.inter_rate) * mult
                family = cfg.intra_family if same else cfg.inter_family
                boundary = (math.floor(t / period) + 1) * period if period else math.inf
                if rate <= 0:
                    t = boundary
                    continue
                gap = max(1, round(family.sample(rng, 1.0 / rate)))
                start = t + gap if t > 0 else float(round(rng.uniform(0, gap)))
                if start >= boundary:
                    # regime changed before the contact happened; redraw from the boundary
                    t = boundary
                    continue
                if start >= cfg.horizon:
                    break
                dur = rng.normal(cfg.contact_duration_mean, cfg.contact_duration_std)
                dur = max(MIN_CONTACT_DURATION, round(dur))
                s = int(start)
                events.append(ContactEvent(s, names[a], names[b], s + dur))
                t = float(s + dur)
    return Trace.from_events(events, names)
