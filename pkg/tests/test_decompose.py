import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import least_squares

from lagdist.decompose import (GammaParams, _concentrate, _moment_start, _SqrtGammaModel, decompose,
                               extract_peaks, fit_baseline_lts, gamma_density, lts_objective,
                               poisson_quantile, poisson_quantiles, residual)
from lagdist.errors import FitError
from lagdist.genomescan import LagHistogram
from lagdist.simgen import GroupParams, draw_mean_locations, gen_distribution, sample_empirical


def brute_quantile(mean, p):
    # plain summation of the pmf from 0 upwards, in log space
    cdf, x = 0.0, 0
    while True:
        cdf += math.exp(-mean + x * math.log(mean) - math.lgamma(x + 1))
        if cdf >= p:
            return x
        x += 1


def sampled_hist(theta, lam, draws=50_000, L=1500, seed=0, k=0):
    lags = np.arange(k + 1, L + 1)
    f = gamma_density(lags, theta, lam)
    f /= f.sum()
    counts = sample_empirical(f, draws, np.random.default_rng(seed))
    return LagHistogram("w", k, L, counts)


# --- gamma density -------------------------------------------------------


def test_exponential_special_case():
    x = np.array([0.5, 3.0, 40.0])
    assert np.allclose(gamma_density(x, 1.0, 0.2), 0.2 * np.exp(-0.2 * x), rtol=1e-13)
    assert gamma_density(1 / 0.2, 1.0, 0.2) == pytest.approx(0.2 / math.e, rel=1e-13)


@pytest.mark.parametrize("theta,lam", [(0.8, 0.0005), (1.0, 0.01), (2.5, 0.3), (0.6, 0.0001)])
def test_density_integrates_to_one(theta, lam):
    from scipy.integrate import quad

    total, _ = quad(gamma_density, 0, 20 / lam, args=(theta, lam), limit=500, points=[1.0, 1 / lam])
    assert total == pytest.approx(1.0, abs=1e-6)


def test_density_domain_errors():
    with pytest.raises(ValueError):
        gamma_density(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        gamma_density(1.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        GammaParams(-1.0, 1.0, 1.0)


# --- residual ------------------------------------------------------------


def test_residual_examples():
    assert residual(50.0, 0.5, 100) == 0.0
    assert residual(121.0, 1.0, 100) == pytest.approx(1.0)


def test_sqrt_stabilises_poisson_variance():
    rng = np.random.default_rng(3)
    for mu in (25, 100, 1000):
        sd = np.sqrt(rng.poisson(mu, 100_000)).std()
        assert abs(sd - 0.5) < 0.1


# --- LTS baseline --------------------------------------------------------


def test_recovers_gamma_parameters():
    h = sampled_hist(0.8, 0.0005, seed=11)
    fit = fit_baseline_lts(h, lstar=1500, restarts=4, seed=1)
    assert fit.params.theta == pytest.approx(0.8, rel=0.05)
    assert fit.params.lam == pytest.approx(0.0005, rel=0.15)
    assert fit.h == math.floor(0.95 * 1500)
    assert np.all(fit.curve >= 0) and fit.mass == pytest.approx(fit.curve.sum())


def test_curve_covers_full_domain():
    h = sampled_hist(0.95, 0.001, L=800, k=3, seed=2)
    fit = fit_baseline_lts(h, lstar=200, restarts=2, seed=0)
    assert len(fit.curve) == 797 and fit.fit_domain_end == 200
    assert np.allclose(fit.curve, fit.params.curve(h.lags))


def test_best_start_wins_and_steps_descend():
    h = sampled_hist(0.6, 0.0001, seed=5)
    fit = fit_baseline_lts(h, lstar=1500, restarts=6, seed=3)
    assert fit.lts_objective <= min(fit.start_objectives) + 1e-12
    assert all(b <= a + 1e-9 for a, b in zip(fit.objective_trace, fit.objective_trace[1:]))
    assert lts_objective(h, fit.params, 1500) == pytest.approx(fit.lts_objective, rel=1e-9)


def test_concentration_steps_never_increase():
    rng = np.random.default_rng(0)
    for seed in range(5):
        h = sampled_hist(0.8, 0.0005, seed=seed, L=600)
        y = np.sqrt(h.counts.astype(float))
        model = _SqrtGammaModel(h.lags.astype(float), h.n)
        p0 = _moment_start(h.lags.astype(float), h.counts.astype(float), h.n) + rng.normal(0, 0.3, 3)
        _, _, trace, _ = _concentrate(model, y, int(0.95 * 600), p0, 50)
        assert np.all(np.diff(trace) <= 1e-9)


def test_full_trim_is_least_squares():
    h = sampled_hist(0.8, 0.0005, seed=4, L=1000)
    fit = fit_baseline_lts(h, lstar=1000, trim=1.0, restarts=3, seed=0)
    y = np.sqrt(h.counts.astype(float))
    model = _SqrtGammaModel(h.lags.astype(float), h.n)
    ref = least_squares(lambda q: model.value(q) - y, np.log([0.9, 0.7, 0.001]),
                        jac=lambda q: model.jacobian(q), method="lm", xtol=1e-12, ftol=1e-12)
    assert np.allclose(np.exp(ref.x), [fit.params.alpha, fit.params.theta, fit.params.lam], rtol=1e-4)
    assert fit.lts_objective == pytest.approx(2 * ref.cost, rel=1e-6)


def test_robust_to_contaminated_lags():
    h = sampled_hist(0.8, 0.0005, seed=8)
    clean = fit_baseline_lts(h, lstar=1500, restarts=4, seed=0)
    rng = np.random.default_rng(1)
    counts = h.counts.copy()
    hit = rng.choice(1500, size=75, replace=False)
    counts[hit] += 20 * np.maximum(counts[hit], 5)
    dirty = fit_baseline_lts(LagHistogram("w", 0, 1500, counts), lstar=1500, restarts=4, seed=0)
    assert dirty.params.theta == pytest.approx(clean.params.theta, rel=0.05)
    assert dirty.params.lam == pytest.approx(clean.params.lam, rel=0.05)


def test_fit_errors():
    with pytest.raises(FitError):
        fit_baseline_lts(LagHistogram("w", 3, 100, np.zeros(97)), lstar=50)
    h = sampled_hist(0.8, 0.0005, L=300)
    with pytest.raises(ValueError):
        fit_baseline_lts(h, lstar=400)
    with pytest.raises(ValueError):
        fit_baseline_lts(h, lstar=200, trim=0.4)


# --- Poisson quantile ----------------------------------------------------


def test_quantile_examples():
    assert poisson_quantile(100, 0.99) == 124
    assert poisson_quantile(50, 0.99) == 67
    assert poisson_quantile(3.0, 1e-12) == 0


@pytest.mark.parametrize("p", [0.5, 0.9, 0.99, 0.999])
def test_quantile_brute_force(p):
    rng = np.random.default_rng(int(p * 1000))
    means = np.concatenate([rng.uniform(0, 5, 30), 10 ** rng.uniform(0, 3.5, 40)])
    exact = [brute_quantile(m, p) for m in means]
    assert [poisson_quantile(m, p) for m in means] == exact
    assert poisson_quantiles(means, p).tolist() == exact


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 2e4), st.floats(1e-3, 2e4), st.sampled_from([0.5, 0.9, 0.99, 0.999]))
def test_quantile_monotone_in_mean(a, b, p):
    lo, hi = sorted((a, b))
    assert poisson_quantile(lo, p) <= poisson_quantile(hi, p)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-2, 2e4), st.floats(0.01, 0.98), st.floats(0.0, 0.0199))
def test_quantile_monotone_in_p(mean, p, dp):
    assert poisson_quantile(mean, p) <= poisson_quantile(mean, p + dp)


def test_vectorised_quantile_matches_scalar():
    rng = np.random.default_rng(9)
    means = np.concatenate([[0.0], rng.uniform(0, 1, 50), 10 ** rng.uniform(-2, 5, 300)])
    for p in (0.9, 0.99, 0.999):
        assert poisson_quantiles(means, p).tolist() == [poisson_quantile(m, p) if m > 0 else 0 for m in means]


# --- peak extraction -----------------------------------------------------


def _fit_for(params, k, L, lstar):
    lags = np.arange(k + 1, L + 1)
    from lagdist.decompose import BaselineFit

    return BaselineFit(params, lags, params.curve(lags), 0.0, 0, lstar)


def test_counts_at_mean_give_no_peaks():
    lags = np.arange(4, 1001)
    params = GammaParams(1.0 / gamma_density(lags, 0.8, 0.002).sum(), 0.8, 0.002)
    fit = _fit_for(params, 3, 1000, 200)
    n = 100_000
    counts = np.round(n * fit.curve).astype(int)
    pk = extract_peaks(LagHistogram("w", 3, 1000, counts), fit)
    assert pk.mass == 0 and len(pk.flagged_lags) == 0


def test_single_spike_is_flagged():
    L = 400
    fit = _fit_for(GammaParams(1.0, 1.0, 1.0), 0, L, L)
    n = 10_000
    curve = np.full(L, 50 / n)
    fit.curve = curve
    counts = np.full(L, 50)
    counts[99] = 500
    h = LagHistogram("w", 0, L, counts)
    pk = extract_peaks(h, fit)
    assert pk.flagged_lags.tolist() == [100]
    assert pk.values[99] == pytest.approx(h.frequencies()[99] - curve[99])


def test_zero_baseline_flags_any_count():
    fit = _fit_for(GammaParams(1.0, 1.0, 1.0), 0, 10, 10)
    fit.curve = np.zeros(10)
    counts = np.zeros(10, dtype=int)
    counts[[2, 7]] = 1
    pk = extract_peaks(LagHistogram("w", 0, 10, counts), fit)
    assert pk.flagged_lags.tolist() == [3, 8]


def test_flagged_means_positive_excess():
    h = sampled_hist(0.8, 0.0005, seed=21, L=1500)
    d = decompose(h, lstar=1500, restarts=2, seed=0)
    f = h.frequencies()
    assert np.all(f[d.peaks.flagged] > d.baseline[d.peaks.flagged])
    assert np.all((d.peak_values > 0) == d.peaks.flagged)


def test_null_flag_rate():
    # data drawn exactly from the baseline: flags should be rare
    L, n = 1500, 50_000
    params = GammaParams(1.0, 0.8, 0.0005)
    fit = _fit_for(params, 0, L, L)
    f = fit.curve / fit.curve.sum()
    fit.curve = f
    rng = np.random.default_rng(4)
    rates = []
    for _ in range(40):
        counts = rng.poisson(n * f)
        rates.append(extract_peaks(LagHistogram("w", 0, L, counts), fit).flagged.mean())
    assert np.mean(rates) <= 0.01 + 0.005


def test_planted_peaks_recovered():
    rng = np.random.default_rng(31)
    group = GroupParams(0.8, 0.0005, 10, 0.05, 1)
    ml = draw_mean_locations(10, rng)
    hits, spurious = 0, []
    for _ in range(5):
        sim = gen_distribution(group, ml, rng)
        h = LagHistogram("w", 0, 1500, sample_empirical(sim.f, 50_000, rng))
        d = decompose(h, lstar=1500, restarts=2, seed=0)
        flagged = set(d.peaks.flagged_lags.tolist())
        planted = set(sim.peak_lags.tolist())
        hits += planted <= flagged
        spurious.append(len(flagged - planted) / 1500)
    assert hits == 5
    assert np.mean(spurious) <= 0.01
