"""Partition agreement and bootstrap cluster stability."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from .cluster import DEFAULT_RESTARTS, Partition, kmeans
from .errors import DegenerateInputError, UndefinedIndexError


def _labels(p):
    return np.asarray(p.labels if isinstance(p, Partition) else p)


def contingency(labels_a, labels_b) -> np.ndarray:
    a = _labels(labels_a)
    b = _labels(labels_b)
    if a.shape != b.shape:
        raise ValueError("partitions cover different numbers of objects")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def adjusted_rand(p1, p2) -> float:
    """Hubert-Arabie adjusted Rand index of two partitions of the same objects.

    Raises ``UndefinedIndexError`` when the index has a zero denominator, e.g.
    when both partitions put everything in one cluster.
    """
    table = contingency(p1, p2)
    m = int(table.sum())
    sum_ij = comb(table, 2).sum()
    sum_a = comb(table.sum(axis=1), 2).sum()
    sum_b = comb(table.sum(axis=0), 2).sum()
    expected = sum_a * sum_b / comb(m, 2) if m > 1 else 0.0
    denom = 0.5 * (sum_a + sum_b) - expected
    if denom == 0:
        raise UndefinedIndexError("adjusted Rand index is undefined for these partitions")
    return float((sum_ij - expected) / denom)


def jaccard(a, b) -> float:
    """Jaccard coefficient of two index sets (0 when both are empty)."""
    a, b = set(a), set(b)
    union = len(a | b)
    return len(a & b) / union if union else 0.0


@dataclass
class StabilityReport:
    """Mean bootstrap Jaccard of each reference cluster.

    ``per_resample`` is ``B x nc``; an entry is NaN when no member of that
    reference cluster was drawn, and such entries are left out of the mean.
    """

    reference: Partition
    per_resample: np.ndarray

    @property
    def B(self) -> int:
        return self.per_resample.shape[0]

    @property
    def jaccard(self) -> np.ndarray:
        return np.nanmean(self.per_resample, axis=0)


def bootstrap_stability(
    X,
    nc: int,
    B: int = 200,
    restarts: int = DEFAULT_RESTARTS,
    seed=0,
    max_redraws: int = 10,
) -> StabilityReport:
    """Cluster-wise stability by resampling objects with replacement.

    The full data is clustered once; each resample is clustered into ``nc``
    groups and every reference cluster is matched to its best new cluster
    by Jaccard, comparing sets of distinct original objects present in the
    resample.  Resamples with fewer than ``nc`` distinct rows are redrawn.
    """
    X = np.asarray(X, dtype=float)
    if B < 1:
        raise ValueError("B must be at least 1")
    ss = np.random.SeedSequence(seed)
    ref_seed, draw_seed, fit_seed = ss.spawn(3)
    reference = kmeans(X, nc, restarts=restarts, seed=ref_seed)
    ref = reference.labels
    m = len(X)
    rng = np.random.default_rng(draw_seed)
    fit_seeds = fit_seed.spawn(B)
    out = np.full((B, nc), np.nan)
    for b in range(B):
        for _ in range(max_redraws + 1):
            idx = rng.integers(0, m, size=m)
            if len(np.unique(X[idx], axis=0)) >= nc:
                break
        else:
            raise DegenerateInputError(f"resample {b} kept collapsing below {nc} distinct rows")
        part = kmeans(X[idx], nc, restarts=restarts, seed=fit_seeds[b])
        present = np.zeros(m, dtype=bool)
        present[idx] = True
        new_sets = [set(idx[part.labels == c].tolist()) for c in range(nc)]
        for c in range(nc):
            members = np.flatnonzero((ref == c) & present)
            if len(members) == 0:
                continue
            out[b, c] = max(jaccard(members, d) for d in new_sets)
    return StabilityReport(reference, out)
