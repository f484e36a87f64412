"""Per-pair inter-contact-time models.

Each pair's ICT samples are fitted by maximum likelihood to an exponential,
a Pareto and a log-normal law; the family with the lowest AIC wins. The
residual helpers condition on the time already elapsed since the pair's last
contact, which is what the forwarding metric needs at an arbitrary encounter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import special

from .trace import Trace, canonical_pair, extract_pair_ict_samples

FAMILIES = ("exponential", "pareto", "lognormal")
DEFAULT_MIN_SAMPLES = 5
# Below this survival (numerically zero) the next contact counts as overdue under the model.
SURVIVAL_FLOOR = 1e-300


_LOG_2PI = math.log(2 * math.pi)


def family_logsf(family: str, p1, p2, t):
    """Log-survival of ``family`` with (broadcastable) parameter arrays."""
    t = np.maximum(t, 0.0)
    if family == "exponential":
        return -p1 * t
    if family == "pareto":
        return np.where(t > p2, p1 * (np.log(p2) - np.log(np.maximum(t, p2))), 0.0)
    with np.errstate(divide="ignore"):
        z = (np.log(t) - p1) / p2
    return special.log_ndtr(-z)


def family_isf_log(family: str, p1, p2, logs):
    """Inverse of :func:`family_logsf`: the time at which log-survival falls to ``logs``."""
    logs = np.minimum(logs, 0.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        if family == "exponential":
            return -logs / p1
        if family == "pareto":
            return p2 * np.exp(-logs / p1)
        # two branches keep precision near survival 1 and near survival 0
        upper = np.exp(p1 + p2 * special.ndtri(-np.expm1(logs)))
        lower = np.exp(p1 - p2 * special.ndtri(np.exp(logs)))
    return np.where(logs > -math.log(2), upper, lower)


def family_logpdf(family: str, p1, p2, t):
    if family == "exponential":
        return np.where(t >= 0, np.log(p1) - p1 * t, -np.inf)
    if family == "pareto":
        out = np.log(p1) + p1 * np.log(p2) - (p1 + 1) * np.log(np.maximum(t, p2))
        return np.where(t >= p2, out, -np.inf)
    lt = np.log(np.maximum(t, 1e-300))
    out = -lt - np.log(p2) - 0.5 * _LOG_2PI - 0.5 * ((lt - p1) / p2) ** 2
    return np.where(t > 0, out, -np.inf)


@dataclass(frozen=True)
class IctModel:
    """Fitted ICT law.

    params: exponential ``(rate,)``; pareto ``(shape, scale)``;
    lognormal ``(log_mean, log_std)``.
    """

    family: str
    params: tuple[float, ...]
    sample_count: int = 0
    source: str = "per-pair"
    aic: Mapping[str, float] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown ICT family {self.family!r}")
        expected = 1 if self.family == "exponential" else 2
        if len(self.params) != expected:
            raise ValueError(f"{self.family} takes {expected} parameter(s), got {len(self.params)}")
        positive = self.params if self.family != "lognormal" else self.params[1:]
        if any(not (p > 0 and math.isfinite(p)) for p in positive):
            raise ValueError(f"{self.family} parameters must be positive and finite: {self.params}")

    @property
    def _p(self) -> tuple[float, float]:
        return (self.params[0], self.params[1] if len(self.params) > 1 else 0.0)

    # closed forms; all accept scalars or arrays
    def logsf(self, t):
        return family_logsf(self.family, *self._p, np.asarray(t, dtype=float))

    def sf(self, t):
        return np.exp(self.logsf(t))

    def cdf(self, t):
        return -np.expm1(self.logsf(t))

    def logpdf(self, t):
        return family_logpdf(self.family, *self._p, np.asarray(t, dtype=float))

    def isf_log(self, logs):
        return family_isf_log(self.family, *self._p, np.asarray(logs, dtype=float))

    def pdf(self, t):
        return np.exp(self.logpdf(t))

    def mean(self) -> float:
        if self.family == "exponential":
            return 1.0 / self.params[0]
        if self.family == "pareto":
            shape, scale = self.params
            return shape * scale / (shape - 1) if shape > 1 else math.inf
        mu, sigma = self.params
        return math.exp(mu + sigma**2 / 2)


class ModelBatch:
    """Several ICT models evaluated together; axis 0 of every input indexes the model."""

    def __init__(self, models: Sequence[IctModel]):
        self.size = len(models)
        self.groups = []
        for family in FAMILIES:
            idx = np.array([k for k, m in enumerate(models) if m.family == family], dtype=int)
            if idx.size:
                p1 = np.array([models[k]._p[0] for k in idx])
                p2 = np.array([models[k]._p[1] for k in idx])
                self.groups.append((family, idx, p1, p2))

    def _eval(self, fn, t):
        t = np.asarray(t, dtype=float)
        out = np.empty_like(t)
        extra = (1,) * (t.ndim - 1)
        for family, idx, p1, p2 in self.groups:
            out[idx] = fn(family, p1.reshape(-1, *extra), p2.reshape(-1, *extra), t[idx])
        return out

    def logsf(self, t):
        return self._eval(family_logsf, t)

    def logpdf(self, t):
        return self._eval(family_logpdf, t)

    def isf_log(self, logs):
        return self._eval(family_isf_log, logs)


def ict_cdf(model: IctModel, t):
    if np.any(np.asarray(t) < 0):
        raise ValueError("ICT cdf is defined for t >= 0")
    return _as_output(model.cdf(t))


def _as_output(out):
    return float(out) if np.ndim(out) == 0 else out


def residual_window_prob(model: IctModel, elapsed, window):
    """P(next contact within ``window`` | ``elapsed`` seconds without one).

    Broadcasts over array ``elapsed``/``window``. An overdue contact (survival
    below the floor at ``elapsed``) counts as certain for any positive window.
    """
    elapsed = np.asarray(elapsed, dtype=float)
    window = np.asarray(window, dtype=float)
    if np.any(elapsed < 0) or np.any(window < 0):
        raise ValueError("elapsed and window must be >= 0")
    base = model.logsf(elapsed)
    overdue = base < math.log(SURVIVAL_FLOOR)
    with np.errstate(invalid="ignore"):
        out = -np.expm1(model.logsf(elapsed + window) - base)
    out = np.where(overdue, 1.0, out)
    out = np.clip(np.where(window > 0, out, 0.0), 0.0, 1.0)
    return _as_output(out)


def residual_density(model: IctModel, elapsed, t):
    """Density of the time until the next contact, given ``elapsed`` seconds without one.

    Returns zeros when the contact is already overdue (survival below the
    floor); callers treat that case as an immediate contact.
    """
    elapsed = np.asarray(elapsed, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(elapsed < 0) or np.any(t < 0):
        raise ValueError("elapsed and t must be >= 0")
    base = model.logsf(elapsed)
    overdue = base < math.log(SURVIVAL_FLOOR)
    with np.errstate(invalid="ignore"):
        out = np.exp(model.logpdf(elapsed + t) - base)
    return _as_output(np.where(overdue, 0.0, out))


def residual_quantile(model: IctModel, elapsed, u):
    """Waiting time until the next contact at conditional CDF level ``u`` (inverse of the window probability)."""
    elapsed = np.asarray(elapsed, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(elapsed < 0) or np.any((u < 0) | (u > 1)):
        raise ValueError("elapsed must be >= 0 and u in [0, 1]")
    base = model.logsf(elapsed)
    with np.errstate(divide="ignore"):
        tau = model.isf_log(base + np.log1p(-u))
    out = np.maximum(tau - elapsed, 0.0)
    return _as_output(np.where(base < math.log(SURVIVAL_FLOOR), 0.0, out))


def is_overdue(model: IctModel, elapsed: float) -> bool:
    return bool(model.logsf(elapsed) < math.log(SURVIVAL_FLOOR))


# -- fitting -----------------------------------------------------------------


def _fit_exponential(x: np.ndarray) -> tuple[tuple[float, ...], float]:
    rate = 1.0 / x.mean()
    ll = x.size * math.log(rate) - rate * x.sum()
    return (rate,), ll


def _fit_pareto(x: np.ndarray) -> tuple[tuple[float, ...], float] | None:
    scale = float(x.min())
    logs = np.log(x / scale).sum()
    if logs <= 0:
        return None
    shape = x.size / logs
    ll = x.size * (math.log(shape) + shape * math.log(scale)) - (shape + 1) * np.log(x).sum()
    return (shape, scale), float(ll)


def _fit_lognormal(x: np.ndarray) -> tuple[tuple[float, ...], float] | None:
    lx = np.log(x)
    mu = float(lx.mean())
    sigma = float(lx.std())
    if sigma <= 0:
        return None
    n = x.size
    ll = -lx.sum() - n * math.log(sigma) - 0.5 * n * math.log(2 * math.pi) - 0.5 * n
    return (mu, sigma), float(ll)


_FITTERS = {"exponential": (_fit_exponential, 1), "pareto": (_fit_pareto, 2), "lognormal": (_fit_lognormal, 2)}


def fit_families(samples: Sequence[float]) -> dict[str, tuple[tuple[float, ...], float]]:
    """MLE fit of every family; returns ``{family: (params, aic)}``.

    Families whose MLE degenerates (e.g. all samples equal) are omitted.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0 or np.any(x <= 0):
        raise ValueError("ICT samples must be non-empty and strictly positive")
    fits = {}
    for family, (fitter, k) in _FITTERS.items():
        res = fitter(x)
        if res is None:
            continue
        params, ll = res
        fits[family] = (params, 2 * k - 2 * ll)
    return fits


def fit_pair_ict(
    samples: Sequence[float],
    min_samples: int = DEFAULT_MIN_SAMPLES,
    aggregate: IctModel | None = None,
) -> IctModel | None:
    """Fit one pair's ICT law, falling back to ``aggregate`` for short histories.

    Returns ``None`` when there are no samples at all, or when the history is
    too short and no aggregate is available.
    """
    n = len(samples)
    if n == 0:
        return None
    if n < min_samples:
        if aggregate is None:
            return None
        return IctModel(aggregate.family, aggregate.params, n, "aggregate-fallback", aggregate.aic)
    fits = fit_families(samples)
    # ties resolve in FAMILIES order, which keeps selection deterministic
    best = min(FAMILIES, key=lambda f: fits[f][1] if f in fits else math.inf)
    return IctModel(best, fits[best][0], n, "per-pair", {f: a for f, (_, a) in fits.items()})


@dataclass(frozen=True)
class IctTable:
    models: Mapping[tuple[str, str], IctModel]
    aggregate: IctModel | None = None

    def get(self, a: str, b: str) -> IctModel | None:
        return self.models.get(canonical_pair(a, b))

    def __len__(self) -> int:
        return len(self.models)


def fit_ict_table(trace: Trace, min_samples: int = DEFAULT_MIN_SAMPLES) -> IctTable:
    per_pair = {pair: extract_pair_ict_samples(trace, pair) for pair in trace.pairs()}
    pooled = [s for samples in per_pair.values() for s in samples]
    aggregate = None
    if len(pooled) >= 2:
        aggregate = fit_pair_ict(pooled, min_samples=2)
        if aggregate is not None:
            aggregate = IctModel(aggregate.family, aggregate.params, len(pooled), "aggregate", aggregate.aic)
    models = {}
    for pair, samples in per_pair.items():
        model = fit_pair_ict(samples, min_samples, aggregate)
        if model is not None:
            models[pair] = model
    return IctTable(models, aggregate)
