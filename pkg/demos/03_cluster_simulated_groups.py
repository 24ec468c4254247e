"""
Clustering simulated lag distributions
======================================

One replica of a three-group design where groups differ both in trend and
in peak locations.  Compare the three feature choices by adjusted Rand
index and scan the validity indices over the number of clusters.
"""

import numpy as np

from lagdist.cluster import kmeans, sweep_nc
from lagdist.decompose import decompose
from lagdist.evaluate import adjusted_rand
from lagdist.features import assemble_features, decomposition_features
from lagdist.simgen import build_case, generate_dataset

case = build_case(T=2, NP=2, PL=2, PM=2, SS=1)
print("case", case.factors, "scenario", case.scenario, "m =", case.m)

data = generate_dataset(case, np.random.default_rng(2))
decs = [decompose(h, restarts=2, seed=i) for i, h in enumerate(data.histograms())]

base, peak = decomposition_features(decs, 0.90)
print("retained components: baseline", base.q, " peaks", peak.q)

for method, name in ((1, "peaks"), (2, "baselines"), (3, "both")):
    X = assemble_features(base, peak, method)
    part = kmeans(X, 3, restarts=20, seed=method)
    print("method %d (%s): ARI %.3f, sizes %s" % (method, name, adjusted_rand(part, data.labels), part.sizes))

X = assemble_features(base, peak, 3)
print("\n nc      CH   silhouette  C-index")
for r in sweep_nc(X, range(2, 7), restarts=10):
    print("%3d %9.1f %10.3f %9.3f" % (r.nc, r.ch, r.silhouette, r.c_index))
