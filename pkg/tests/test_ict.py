import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sp_integrate

from crowdcast.ict import (
    FAMILIES,
    IctModel,
    fit_families,
    fit_ict_table,
    fit_pair_ict,
    ict_cdf,
    is_overdue,
    residual_density,
    residual_quantile,
    residual_window_prob,
)
from crowdcast.metric import QuadratureOptions, integrate_residual
from crowdcast.trace import ContactEvent, Trace

from oracles import sample_residual

EXP = IctModel("exponential", (0.01,))
PARETO = IctModel("pareto", (1.5, 60.0))
LOGN = IctModel("lognormal", (6.0, 1.2))
MODELS = [EXP, PARETO, LOGN]


def draws(family, n, rng):
    if family == "exponential":
        return rng.exponential(100.0, n)
    if family == "pareto":
        return 60.0 * (1 + rng.pareto(1.5, n))
    return rng.lognormal(6.0, 1.0, n)


def test_fit_exponential_recovers_rate():
    model = fit_pair_ict(draws("exponential", 500, np.random.default_rng(1)))
    assert model.family == "exponential" and model.source == "per-pair"
    assert model.params[0] == pytest.approx(0.01, rel=0.1)
    assert set(model.aic) == set(FAMILIES)


def test_fit_pareto_selected():
    model = fit_pair_ict(draws("pareto", 500, np.random.default_rng(2)))
    assert model.family == "pareto"
    shape, scale = model.params
    assert shape == pytest.approx(1.5, rel=0.15)
    assert scale >= 60.0


def test_fit_lognormal_selected():
    model = fit_pair_ict(draws("lognormal", 500, np.random.default_rng(3)))
    assert model.family == "lognormal"
    assert model.params[0] == pytest.approx(6.0, abs=0.15)


def test_short_history_falls_back():
    agg = IctModel("exponential", (0.002,), 100, "aggregate")
    model = fit_pair_ict([10, 20, 30], min_samples=5, aggregate=agg)
    assert model.source == "aggregate-fallback" and model.params == agg.params and model.sample_count == 3
    assert fit_pair_ict([10, 20, 30]) is None
    assert fit_pair_ict([], aggregate=agg) is None


def test_fit_is_deterministic():
    x = draws("lognormal", 300, np.random.default_rng(9))
    assert fit_pair_ict(x) == fit_pair_ict(list(x))


def test_closed_form_mles():
    x = np.array([50.0, 80.0, 120.0, 300.0, 75.0])
    fits = fit_families(x)
    assert fits["exponential"][0][0] == pytest.approx(1 / x.mean())
    assert fits["pareto"][0] == pytest.approx((len(x) / np.log(x / 50.0).sum(), 50.0))
    assert fits["lognormal"][0] == pytest.approx((np.log(x).mean(), np.log(x).std()))
    # AIC = 2k - 2 log L, recomputed from scipy densities
    from scipy import stats

    ll_exp = stats.expon(scale=x.mean()).logpdf(x).sum()
    assert fits["exponential"][1] == pytest.approx(2 - 2 * ll_exp)
    mu, sigma = fits["lognormal"][0]
    ll_ln = stats.lognorm(s=sigma, scale=math.exp(mu)).logpdf(x).sum()
    assert fits["lognormal"][1] == pytest.approx(4 - 2 * ll_ln)


def test_equal_samples_skip_degenerate_families():
    fits = fit_families([30.0] * 6)
    assert set(fits) == {"exponential"}
    assert fit_pair_ict([30.0] * 6).family == "exponential"


def test_table_aggregate_and_missing_pairs():
    events = [ContactEvent(s, "a", "b", s + 10) for s in range(0, 1000, 100)]
    events += [ContactEvent(5, "a", "c", 15), ContactEvent(500, "a", "c", 510)]
    events += [ContactEvent(7, "b", "c", 8)]
    table = fit_ict_table(Trace.from_events(events))
    assert table.aggregate is not None and table.aggregate.source == "aggregate"
    assert table.get("b", "a").source == "per-pair"
    assert table.get("c", "a").source == "aggregate-fallback"
    assert table.get("b", "c") is None  # single contact: no samples, no model


def test_cdf_examples():
    assert ict_cdf(IctModel("exponential", (1 / 500,)), 500) == pytest.approx(1 - math.exp(-1))
    for m in MODELS:
        assert ict_cdf(m, 0) == 0
        assert ict_cdf(m, 1e12) == pytest.approx(1, abs=1e-6)
    with pytest.raises(ValueError):
        ict_cdf(EXP, -1)


def test_residual_examples():
    for elapsed in (0, 50, 1e4):
        assert residual_window_prob(EXP, elapsed, 250) == pytest.approx(1 - math.exp(-2.5))
    for m in MODELS:
        assert residual_window_prob(m, 100, 0) == 0
        assert residual_window_prob(m, 0, 400) == pytest.approx(ict_cdf(m, 400))
    with pytest.raises(ValueError):
        residual_window_prob(EXP, -1, 10)


def test_residual_pareto_vs_monte_carlo():
    rng = np.random.default_rng(11)
    tau = sample_residual("pareto", (1.5, 60.0), 120.0, rng, size=100_000)
    assert residual_window_prob(PARETO, 120, 300) == pytest.approx(np.mean(tau <= 300), abs=0.01)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.family)
def test_residual_vs_monte_carlo_all_families(model):
    rng = np.random.default_rng(12)
    for elapsed, window in ((0, 200), (300, 600), (2000, 5000)):
        tau = sample_residual(model.family, model.params, elapsed, rng, size=100_000)
        assert residual_window_prob(model, elapsed, window) == pytest.approx(np.mean(tau <= window), abs=0.01)


def test_overdue_counts_as_certain():
    fast = IctModel("exponential", (1.0,))  # survival e^-1000 at elapsed 1000
    assert is_overdue(fast, 1000) and not is_overdue(fast, 100)
    assert residual_window_prob(fast, 1000, 1) == 1.0
    assert residual_density(fast, 1000, 1) == 0.0
    assert residual_quantile(fast, 1000, 0.5) == 0.0


def test_density_examples():
    assert residual_density(EXP, 0, 30) == pytest.approx(0.01 * math.exp(-0.3))
    assert residual_density(EXP, 777, 30) == pytest.approx(0.01 * math.exp(-0.3))
    assert residual_density(LOGN, 40, 123.0) == residual_density(LOGN, 40, 123.0)
    assert residual_density(PARETO, 0, 30) == 0  # before the scale


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.family)
def test_density_integrates_to_one(model):
    big = 1e7
    for elapsed in (0.0, 150.0):
        # split at the Pareto scale and at a few decades so the adaptive rule sees the mass
        cuts = sorted({max(60.0 - elapsed, 0.0), 1e2, 1e3, 1e4, 1e5, big} - {0.0})
        total, lo = 0.0, 0.0
        for hi in cuts:
            total += sp_integrate.quad(lambda t: residual_density(model, elapsed, t), lo, hi, limit=200)[0]
            lo = hi
        assert total == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.family)
def test_density_quadrature_matches_window_prob(model):
    opts = QuadratureOptions(n=64)
    for elapsed in (0.0, 45.0, 900.0):
        for window in (30.0, 700.0, 20000.0):
            got = integrate_residual(model, elapsed, lambda t: np.ones_like(t), window, opts)
            assert abs(got - residual_window_prob(model, elapsed, window)) <= 1e-4


def test_quantile_inverts_window_prob():
    for m in MODELS:
        for elapsed in (0.0, 70.0, 3000.0):
            for window in (20.0, 500.0, 8000.0):
                p = residual_window_prob(m, elapsed, window)
                if 0 < p < 1:
                    assert residual_quantile(m, elapsed, p) == pytest.approx(window, rel=1e-6)


def test_invalid_models():
    with pytest.raises(ValueError):
        IctModel("gamma", (1.0,))
    with pytest.raises(ValueError):
        IctModel("pareto", (1.5,))
    with pytest.raises(ValueError):
        IctModel("exponential", (-1.0,))
    with pytest.raises(ValueError):
        IctModel("lognormal", (1.0, 0.0))


# -- properties ------------------------------------------------------------------

models = st.one_of(
    st.builds(lambda r: IctModel("exponential", (r,)), st.floats(1e-5, 1e-1)),
    st.builds(lambda a, s: IctModel("pareto", (a, s)), st.floats(0.3, 4.0), st.floats(1.0, 5000.0)),
    st.builds(lambda m, s: IctModel("lognormal", (m, s)), st.floats(0.0, 10.0), st.floats(0.1, 3.0)),
)
times = st.floats(0, 1e5)


@settings(max_examples=200, deadline=None)
@given(models, times, times, times)
def test_window_monotone_and_bounded(model, elapsed, w1, w2):
    lo, hi = sorted((w1, w2))
    a, b = residual_window_prob(model, elapsed, lo), residual_window_prob(model, elapsed, hi)
    assert 0 <= a <= b + 1e-12 <= 1 + 1e-12


@settings(max_examples=200, deadline=None)
@given(models, times)
def test_zero_elapsed_is_plain_cdf(model, w):
    assert residual_window_prob(model, 0, w) == pytest.approx(ict_cdf(model, w), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(models, st.floats(0, 2e4), st.floats(1, 5e4))
def test_density_quadrature_property(model, elapsed, window):
    got = integrate_residual(model, elapsed, lambda t: np.ones_like(t), window, QuadratureOptions())
    assert abs(got - residual_window_prob(model, elapsed, window)) <= 1e-4
