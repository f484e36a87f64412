"""Node evaluation metric.

The metric is the probability that a node delivers a data item to its
destination before the item expires. It is zero unless the destination is in
the node's 2-hop cluster view; otherwise it combines direct and one-relay
contact probabilities from the pairs' residual ICT laws, averaged over how
long the current cluster is expected to survive.

All time windows are vectorized over their end point so that the average over
cluster durations costs one nested Simpson grid per relay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .clusters import ClusterDurationModel, ClusterView, DurationTable
from .ict import SURVIVAL_FLOOR, IctModel, IctTable, ModelBatch, residual_window_prob

COMBINE_RULES = ("noisy-or", "clamped-sum")
# The normal f_c is integrated over mean +/- this many standard deviations.
DURATION_SPAN_SD = 6.0
MIN_MASS = 1e-12


@dataclass(frozen=True)
class QuadratureOptions:
    n: int = 256
    combine_rule: str = "noisy-or"
    max_relays: int = 8

    def __post_init__(self):
        if self.n < 16:
            raise ValueError("quadrature needs at least 16 subintervals")
        if self.max_relays < 1:
            raise ValueError("max_relays must be >= 1")
        if self.combine_rule not in COMBINE_RULES:
            raise ValueError(f"unknown combine rule {self.combine_rule!r}")

    @property
    def intervals(self) -> int:
        return self.n + (self.n % 2)


@dataclass(frozen=True)
class MetricContext:
    """Everything node ``i`` knows when asked to carry a message for ``d`` at ``t_e``."""

    i: str
    d: str
    t_e: float
    t_v: float
    view: ClusterView
    ict_table: IctTable
    durations: DurationTable | ClusterDurationModel
    t_s: float | None = None
    options: QuadratureOptions = QuadratureOptions()

    def __post_init__(self):
        if not self.t_e < self.t_v:
            raise ValueError(f"encounter time {self.t_e} must precede expiry {self.t_v}")
        if self.t_s is not None and self.t_s > self.t_e:
            raise ValueError("generation time must not follow the encounter time")

    def duration_model(self, a: str, b: str) -> ClusterDurationModel:
        if isinstance(self.durations, ClusterDurationModel):
            return self.durations
        return self.durations.get(a, b)

    def last_end(self, a: str, b: str) -> float | None:
        """Last contact end of pair (a, b) as known to ``i``."""
        if a == self.i:
            return self.view.members.get(b)
        if b == self.i:
            return self.view.members.get(a)
        for x, y in ((a, b), (b, a)):
            snap = self.view.snapshots.get(x)
            if snap is not None and y in snap:
                return snap[y]
        return None


# -- quadrature --------------------------------------------------------------


def simpson_weights(n: int) -> np.ndarray:
    """Composite Simpson weights for ``n`` (even) subintervals of unit width."""
    if n < 2 or n % 2:
        raise ValueError("Simpson's rule needs an even number of subintervals")
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def integrate(f: Callable[[np.ndarray], np.ndarray], a: float, b: float, opts: QuadratureOptions | None = None) -> float:
    opts = opts or QuadratureOptions()
    if a > b:
        raise ValueError(f"lower limit {a} exceeds upper limit {b}")
    if a == b:
        return 0.0
    n = opts.intervals
    x = np.linspace(a, b, n + 1)
    h = (b - a) / n
    return float(h * np.dot(simpson_weights(n), f(x)))


def _combine(probs: Sequence[np.ndarray | float], rule: str, axis: int | None = None):
    """Combine independent path probabilities; ``axis`` combines along an array axis instead."""
    if axis is not None:
        probs = np.asarray(probs, dtype=float)
        if rule == "noisy-or":
            with np.errstate(divide="ignore"):
                miss = np.sum(np.log1p(-np.minimum(probs, 1.0)), axis=axis)
            return np.clip(-np.expm1(miss), 0.0, 1.0)
        if rule == "clamped-sum":
            return np.clip(np.sum(probs, axis=axis), 0.0, 1.0)
        raise ValueError(f"unknown combine rule {rule!r}")
    if rule == "noisy-or":
        miss = 1.0
        for p in probs:
            miss = miss * (1.0 - np.asarray(p, dtype=float))
        return np.clip(1.0 - miss, 0.0, 1.0)
    if rule == "clamped-sum":
        total = 0.0
        for p in probs:
            total = total + np.asarray(p, dtype=float)
        return np.clip(total, 0.0, 1.0)
    raise ValueError(f"unknown combine rule {rule!r}")


def combine_relays(probs: Sequence[float], rule: str = "noisy-or") -> float:
    if any(not 0.0 <= p <= 1.0 for p in probs):
        raise ValueError("relay probabilities must lie in [0, 1]")
    return float(_combine(list(probs), rule))


# -- pairwise legs -------------------------------------------------------------
#
# Every helper below works on K pairs at once: axis 0 of each array indexes the
# pair, trailing axes are time grids.

_LOG_FLOOR = math.log(SURVIVAL_FLOOR)


class _Legs:
    """ICT models and last-contact ends for K pairs, as seen by ``ctx.i``."""

    def __init__(self, ctx: MetricContext, pairs: Sequence[tuple[str, str]]):
        models = [ctx.ict_table.get(a, b) for a, b in pairs]
        self.known = np.array([m is not None for m in models], dtype=bool)
        # unknown pairs get a placeholder model; their rows are zeroed by callers
        self.batch = ModelBatch([m if m is not None else _PLACEHOLDER for m in models])
        last = [ctx.last_end(a, b) for a, b in pairs]
        self.last = np.array([np.nan if v is None else v for v in last], dtype=float)

    def start(self, t1):
        """Earliest next-contact time and elapsed gap there, for window starts ``t1`` (K, ...)."""
        last = self.last.reshape(-1, *([1] * (np.ndim(t1) - 1)))
        unknown = np.isnan(last)
        start = np.where(unknown, t1, np.fmax(t1, last))
        elapsed = np.where(unknown, 0.0, start - np.where(unknown, 0.0, last))
        return start, elapsed

    def window_prob(self, t1, t2):
        """P(next contact in (t1, t2)) per pair, conditioned on the gap so far."""
        t1, t2 = np.broadcast_arrays(np.asarray(t1, dtype=float), np.asarray(t2, dtype=float))
        start, elapsed = self.start(t1)
        window = np.maximum(t2 - start, 0.0)
        base = self.batch.logsf(elapsed)
        with np.errstate(invalid="ignore"):
            p = -np.expm1(self.batch.logsf(elapsed + window) - base)
        p = np.where(base < _LOG_FLOOR, 1.0, p)
        p = np.where(window > 0, p, 0.0)
        known = self.known.reshape(-1, *([1] * (p.ndim - 1)))
        return np.clip(np.where(known, p, 0.0), 0.0, 1.0)


_PLACEHOLDER = IctModel("exponential", (1.0,))


def _relays(ctx: MetricContext, i: str, relays: Sequence[str], d: str, t1: float, t2) -> np.ndarray:
    """Two-leg probabilities i -> j -> d inside (t1, t2) for each relay j.

    ``t2`` is (M,) shared by all relays or (K, M) per relay; returns (K, M).
    The first leg's residual density is integrated against the second leg's
    window probability. The integral runs over the first leg's conditional
    CDF level rather than over time, which keeps heavy-tailed and
    discontinuous densities (Pareto) as accurate as smooth ones.
    """
    k = len(relays)
    t2 = np.asarray(t2, dtype=float)
    t2 = np.broadcast_to(t2, (k, t2.shape[-1])) if t2.ndim == 1 else t2
    if k == 0:
        return np.zeros((0, t2.shape[-1]))
    first = _Legs(ctx, [(i, j) for j in relays])
    second = _Legs(ctx, [(j, d) for j in relays])
    start, elapsed = first.start(np.full(k, float(t1)))
    reach = first.window_prob(np.broadcast_to(start[:, None], t2.shape), t2)
    n = ctx.options.intervals
    u = reach[:, :, None] * np.linspace(0.0, 1.0, n + 1)
    t0 = start[:, None, None] + _quantile(first.batch, elapsed, u)
    t0 = np.minimum(t0, t2[:, :, None])
    onward = second.window_prob(t0, t2[:, :, None])
    out = reach * (onward @ simpson_weights(n)) / n
    ok = (first.known & second.known)[:, None]
    return np.clip(np.where(ok, out, 0.0), 0.0, 1.0)


def _quantile(batch: ModelBatch, elapsed: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Residual waiting time at conditional CDF level ``u`` (K, ...); overdue rows wait zero."""
    base = batch.logsf(elapsed).reshape(-1, *([1] * (u.ndim - 1)))
    e = elapsed.reshape(base.shape)
    with np.errstate(divide="ignore"):
        tau = batch.isf_log(base + np.log1p(-u))
    return np.where(base < _LOG_FLOOR, 0.0, np.maximum(tau - e, 0.0))


def integrate_residual(model: IctModel, elapsed: float, g: Callable[[np.ndarray], np.ndarray], window: float,
                       opts: QuadratureOptions | None = None) -> float:
    """``integral_0^window f(t) g(t) dt`` for the residual ICT density ``f`` after ``elapsed`` seconds.

    Uses the same CDF-level substitution as the relay legs.
    """
    opts = opts or QuadratureOptions()
    if window < 0 or elapsed < 0:
        raise ValueError("elapsed and window must be >= 0")
    batch = ModelBatch([model])
    reach = float(residual_window_prob(model, elapsed, window))
    n = opts.intervals
    u = reach * np.linspace(0.0, 1.0, n + 1)[None, :]
    t = np.minimum(_quantile(batch, np.array([float(elapsed)]), u)[0], window)
    return float(reach * np.dot(simpson_weights(n), g(t)) / n)


def direct_prob(ctx: MetricContext, a: str, b: str, t1: float, t2: float) -> float:
    if t1 > t2:
        raise ValueError("window start after window end")
    return float(_Legs(ctx, [(a, b)]).window_prob(np.array([t1]), np.array([t2]))[0])


def relay_prob(ctx: MetricContext, i: str, j: str, d: str, t1: float, t2: float) -> float:
    if t1 > t2:
        raise ValueError("window start after window end")
    return float(_relays(ctx, i, [j], d, t1, np.array([t2]))[0, 0])


def _strongest(ctx: MetricContext, candidates: list[str]) -> list[str]:
    """Keep the ``max_relays`` candidates with the best direct (i, j) odds over the whole validity."""
    if len(candidates) <= ctx.options.max_relays:
        return candidates
    k = len(candidates)
    odds = _Legs(ctx, [(ctx.i, j) for j in candidates]).window_prob(np.full(k, ctx.t_e), np.full(k, ctx.t_v))
    order = sorted(range(k), key=lambda q: (-odds[q], candidates[q]))
    return [candidates[q] for q in order[: ctx.options.max_relays]]


def relay_set(ctx: MetricContext) -> list[str]:
    return _strongest(ctx, ctx.view.bridges_to(ctx.d))


def _window(ctx: MetricContext, t1: float, t2, relays: list[str]) -> np.ndarray:
    """Direct-or-relayed delivery odds for every end point in ``t2`` (M,)."""
    t2 = np.atleast_1d(np.asarray(t2, dtype=float))
    direct = _Legs(ctx, [(ctx.i, ctx.d)]).window_prob(np.full((1, t2.size), float(t1)), t2[None, :])
    parts = np.concatenate([direct, _relays(ctx, ctx.i, relays, ctx.d, t1, t2)])
    return _combine(parts, ctx.options.combine_rule, axis=0)


def window_delivery_prob(ctx: MetricContext, t1: float, t2: float) -> float:
    """Direct plus relayed delivery odds for ``d`` inside (t1, t2)."""
    if t1 > t2:
        raise ValueError("window start after window end")
    return float(_window(ctx, t1, t2, relay_set(ctx))[0])


# -- averaging over cluster duration -----------------------------------------


def _expected(
    ctx: MetricContext,
    t_cs: np.ndarray,
    models: Sequence[ClusterDurationModel],
    prob_until: Callable[[np.ndarray], np.ndarray],
) -> np.ndarray:
    """Average ``prob_until(min(t_v, t_cs + c))`` over cluster duration ``c``, for K clusters.

    ``c`` follows each cluster's normal duration model conditioned on
    ``c >= t_e - t_cs`` (alive at ``t_e``) and truncated to mean +/- 6 sd.
    Durations past ``t_v - t_cs`` use the full validity window, shorter ones
    stop where the cluster ends. A cluster that already outlived the model's
    support is treated as lasting through ``t_v``.
    """
    t_e, t_v = ctx.t_e, ctx.t_v
    t_cs = np.asarray(t_cs, dtype=float)
    mu = np.array([m.mean for m in models])
    sd = np.array([m.std for m in models])
    lo = np.maximum.reduce([t_e - t_cs, np.zeros_like(t_cs), mu - DURATION_SPAN_SD * sd])
    hi = mu + DURATION_SPAN_SD * sd
    c_full = t_v - t_cs
    upper = np.maximum(np.minimum(c_full, hi), lo)
    n = ctx.options.intervals
    c = lo[:, None] + (upper - lo)[:, None] * np.linspace(0.0, 1.0, n + 1)
    t2 = np.concatenate([np.minimum(t_cs[:, None] + c, t_v), np.full((len(t_cs), 1), t_v)], axis=1)
    probs = np.asarray(prob_until(t2), dtype=float)
    full = probs[:, -1]

    cdf = lambda x: special.ndtr((x - mu) / sd)  # noqa: E731
    mass = cdf(hi) - cdf(lo)
    eq5 = np.where(c_full < hi, cdf(hi) - cdf(np.maximum(c_full, lo)), 0.0) * full
    density = np.exp(-0.5 * ((c - mu[:, None]) / sd[:, None]) ** 2) / (sd[:, None] * math.sqrt(2 * math.pi))
    eq6 = (upper - lo) / n * ((density * probs[:, :-1]) @ simpson_weights(n))
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (eq5 + eq6) / mass
    out = np.where((lo >= hi) | (mass < MIN_MASS), full, out)
    return np.clip(out, 0.0, 1.0)


def expected_over_duration(
    ctx: MetricContext,
    t_cs: float,
    model: ClusterDurationModel,
    prob_until: Callable[[np.ndarray], np.ndarray],
) -> float:
    """Scalar form of the cluster-duration average; ``prob_until`` maps end points (M,) to odds (M,)."""
    return float(_expected(ctx, np.array([t_cs]), [model], lambda t2: prob_until(t2[0])[None, :])[0])


def expected_in_cluster_prob(ctx: MetricContext) -> float:
    if ctx.d not in ctx.view.members:
        raise ValueError(f"{ctx.d!r} is not in {ctx.i!r}'s cluster")
    relays = relay_set(ctx)
    t_cs = ctx.view.since[ctx.d]
    model = ctx.duration_model(ctx.i, ctx.d)
    return expected_over_duration(ctx, t_cs, model, lambda t2: _window(ctx, ctx.t_e, t2, relays))


def adjacent_cluster_prob(ctx: MetricContext) -> float:
    """Delivery odds through bridges: members whose own cluster holds ``d``.

    Each bridge's two-leg probability is averaged over the duration of the
    (i, bridge) co-membership, then bridges are combined.
    """
    bridges = relay_set(ctx)
    if not bridges:
        return 0.0
    t_cs = np.array([ctx.view.since[j] for j in bridges])
    models = [ctx.duration_model(ctx.i, j) for j in bridges]
    per_bridge = _expected(ctx, t_cs, models, lambda t2: _relays(ctx, ctx.i, bridges, ctx.d, ctx.t_e, t2))
    return float(_combine(per_bridge, ctx.options.combine_rule, axis=0))


def classify(ctx: MetricContext) -> str:
    if ctx.d == ctx.i:
        return "identity"
    if ctx.d in ctx.view.members:
        return "in-cluster"
    if ctx.d in ctx.view.two_hop():
        return "adjacent"
    return "gated"


def evaluate(ctx: MetricContext) -> tuple[str, float]:
    case = classify(ctx)
    if case == "identity":
        return case, 1.0
    if case == "in-cluster":
        return case, expected_in_cluster_prob(ctx)
    if case == "adjacent":
        return case, adjacent_cluster_prob(ctx)
    return case, 0.0


def forwarding_metric(ctx: MetricContext) -> float:
    return evaluate(ctx)[1]
