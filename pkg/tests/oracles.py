"""Independent Monte Carlo oracles.

Samplers here use their own closed-form survival inverses rather than the
package's ICT code, so agreement is a genuine cross-check.
"""

from __future__ import annotations

import numpy as np
from scipy import special, stats


def log_survival(family: str, params, t):
    t = np.maximum(np.asarray(t, dtype=float), 0.0)
    if family == "exponential":
        return -params[0] * t
    if family == "pareto":
        shape, scale = params
        return np.where(t <= scale, 0.0, shape * (np.log(scale) - np.log(np.maximum(t, scale))))
    mu, sigma = params
    return stats.lognorm(s=sigma, scale=np.exp(mu)).logsf(t)


def sample_residual(family: str, params, elapsed, rng: np.random.Generator, size: int | None = None):
    """Draw the waiting time to the next contact given ``elapsed`` seconds without one.

    ``elapsed`` may be an array (one draw per entry) or a scalar with ``size``.
    Inverts ``S(elapsed + tau) = u * S(elapsed)`` in log space.
    """
    elapsed = np.asarray(elapsed, dtype=float)
    if size is not None:
        elapsed = np.broadcast_to(elapsed, (size,))
    target = np.log(rng.uniform(size=elapsed.shape)) + log_survival(family, params, elapsed)
    if family == "exponential":
        t = -target / params[0]
    elif family == "pareto":
        shape, scale = params
        t = scale * np.exp(-target / shape)
    else:
        mu, sigma = params
        t = np.exp(mu - sigma * special.ndtri(np.exp(target)))
    return np.maximum(t - elapsed, 0.0)


def draw_next_contact(family, params, last_end, t1, rng, size=None):
    """Absolute time of the next contact after ``t1`` for a pair last seen at ``last_end``."""
    t1 = np.asarray(t1, dtype=float)
    start = np.maximum(t1, last_end)
    return start + sample_residual(family, params, start - last_end, rng, size)


def truncated_normal(mean, std, lo, hi, rng, size):
    a, b = (lo - mean) / std, (hi - mean) / std
    return stats.truncnorm(a, b, loc=mean, scale=std).rvs(size=size, random_state=rng)
