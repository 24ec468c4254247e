"""
Baseline plus peaks for one distribution
========================================

Draw a lag distribution from a gamma trend with ten narrow peaks, fit the
trend by least trimmed squares on square-root counts and read off the
lags flagged above the Poisson 0.99 quantile.
"""

import numpy as np

from lagdist.decompose import decompose, poisson_quantile
from lagdist.genomescan import LagHistogram
from lagdist.simgen import GroupParams, draw_mean_locations, gen_distribution, sample_empirical

rng = np.random.default_rng(1)

group = GroupParams(theta=0.8, lam=0.0005, n_peaks=10, peak_mass=0.05, size=1)
ml = draw_mean_locations(10, rng)
sim = gen_distribution(group, ml, rng)
counts = sample_empirical(sim.f, 50_000, rng)
hist = LagHistogram("demo", 0, 1500, counts)

d = decompose(hist, lstar=1500, restarts=5, seed=0)
p = d.fit.params
print("true   theta=%.4f lam=%.6f" % (sim.theta, sim.lam))
print("fitted theta=%.4f lam=%.6f alpha=%.4f" % (p.theta, p.lam, p.alpha))
print("baseline mass %.4f, peak mass %.4f (true 0.95 / 0.05)" % (d.fit.mass, d.peaks.mass))

print("planted peak lags:", np.sort(sim.peak_lags))
print("flagged lags:     ", d.peaks.flagged_lags)

# the threshold at a lag with expected count 100
print("Q(100, 0.99) =", poisson_quantile(100, 0.99))
