"""Multi-start k-means and the Calinski-Harabasz, C and silhouette indices."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import DegenerateInputError, UndefinedIndexError

DEFAULT_RESTARTS = 50
DEFAULT_MAX_ITER = 100
C_INDEX_WARN_SIZE = 20_000


@dataclass
class Partition:
    """Hard assignment of ``m`` objects to ``nc`` nonempty clusters."""

    labels: np.ndarray
    nc: int
    centers: np.ndarray
    objective: float
    restart_objectives: list = field(default_factory=list)

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.nc)


@dataclass
class ValidityReport:
    nc: int
    ch: float
    silhouette: float
    c_index: float
    partition: Partition | None = None


def _labels(partition) -> np.ndarray:
    labels = partition.labels if isinstance(partition, Partition) else partition
    return np.asarray(labels)


def _sq_dist(X, C):
    d = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def within_ss(X, labels) -> float:
    """Sum of squared distances of each row to its cluster mean."""
    X = np.asarray(X, dtype=float)
    _, inv = np.unique(labels, return_inverse=True)
    counts = np.bincount(inv)
    sums = np.zeros((len(counts), X.shape[1]))
    np.add.at(sums, inv, X)
    centers = sums / counts[:, None]
    return float(((X - centers[inv]) ** 2).sum())


def lloyd(X, centers, max_iter: int = DEFAULT_MAX_ITER, trace: list | None = None):
    """Lloyd iterations from the given centres until assignments stop changing.

    An emptied cluster is re-seeded with the object farthest from its
    current centre.  When ``trace`` is a list the objective after every
    update is appended to it.  Returns ``(labels, centers, objective)``.
    """
    X = np.asarray(X, dtype=float)
    C = np.array(centers, dtype=float)
    nc = len(C)
    labels = None
    for _ in range(max_iter):
        d = _sq_dist(X, C)
        new = d.argmin(axis=1)
        counts = np.bincount(new, minlength=nc)
        while np.any(counts == 0):
            empty = int(np.flatnonzero(counts == 0)[0])
            own = d[np.arange(len(X)), new]
            # only donors from clusters that keep at least one member
            own = np.where(counts[new] > 1, own, -1.0)
            far = int(own.argmax())
            counts[new[far]] -= 1
            new[far] = empty
            counts[empty] += 1
            C[empty] = X[far]
        for c in range(nc):
            C[c] = X[new == c].mean(axis=0)
        obj = float(((X - C[new]) ** 2).sum())
        if trace is not None:
            trace.append(obj)
        if labels is not None and np.array_equal(new, labels):
            labels = new
            break
        labels = new
    return labels, C, float(((X - C[labels]) ** 2).sum())


def kmeans(
    X,
    nc: int,
    restarts: int = DEFAULT_RESTARTS,
    max_iter: int = DEFAULT_MAX_ITER,
    seed=None,
) -> Partition:
    """Best of ``restarts`` Lloyd runs, each started from ``nc`` distinct objects."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("features must be a 2-D matrix")
    m = len(X)
    if not 2 <= nc <= m:
        raise ValueError(f"need 2 <= nc <= m, got nc={nc}, m={m}")
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    uniq, first = np.unique(X, axis=0, return_index=True)
    if nc > len(uniq):
        raise DegenerateInputError(f"{nc} clusters requested but only {len(uniq)} distinct rows")
    rng = np.random.default_rng(seed)
    best, objs = None, []
    for _ in range(restarts):
        init = X[rng.choice(first, size=nc, replace=False)]
        labels, centers, obj = lloyd(X, init, max_iter)
        objs.append(obj)
        if best is None or obj < best[2]:
            best = (labels, centers, obj)
    labels, centers, obj = best
    return Partition(labels.astype(np.int64), nc, centers, obj, objs)


def _check_nc(labels):
    nc = len(np.unique(labels))
    if nc < 2:
        raise UndefinedIndexError("index is undefined for a single cluster")
    return nc


def ch_index(X, partition) -> float:
    """Calinski-Harabasz ``(B / (nc - 1)) / (W / (m - nc))``; +inf when ``W == 0``."""
    X = np.asarray(X, dtype=float)
    labels = _labels(partition)
    nc = _check_nc(labels)
    m = len(X)
    if nc >= m:
        raise UndefinedIndexError("CH index is undefined when every object is its own cluster")
    _, inv = np.unique(labels, return_inverse=True)
    sizes = np.bincount(inv)
    centers = np.zeros((nc, X.shape[1]))
    np.add.at(centers, inv, X)
    centers /= sizes[:, None]
    grand = X.mean(axis=0)
    B = float((sizes * ((centers - grand) ** 2).sum(axis=1)).sum())
    W = float(((X - centers[inv]) ** 2).sum())
    if W == 0:
        return float("inf")
    return (B / (nc - 1)) / (W / (m - nc))


def c_index(X, partition) -> float:
    """Hubert-Levin C index ``(S_w - S_min) / (S_max - S_min)`` in ``[0, 1]``."""
    X = np.asarray(X, dtype=float)
    labels = _labels(partition)
    _check_nc(labels)
    m = len(X)
    if m > C_INDEX_WARN_SIZE:
        warnings.warn(f"C index on {m} objects needs {m * (m - 1) // 2} pairwise distances",
                      RuntimeWarning, stacklevel=2)
    d = pdist(X)
    i, j = np.triu_indices(m, k=1)
    same = labels[i] == labels[j]
    N = int(same.sum())
    if N == 0:
        raise UndefinedIndexError("C index is undefined without within-cluster pairs")
    s_w = float(d[same].sum())
    if N < len(d):
        s_min = float(np.partition(d, N - 1)[:N].sum())
        s_max = float(np.partition(d, len(d) - N)[len(d) - N:].sum())
    else:
        s_min = s_max = float(d.sum())
    if s_max == s_min:
        raise UndefinedIndexError("C index is undefined when all pair distances coincide")
    return min(1.0, max(0.0, (s_w - s_min) / (s_max - s_min)))


def silhouette_values(X, partition) -> np.ndarray:
    """Per-object silhouette widths; singletons get 0."""
    X = np.asarray(X, dtype=float)
    labels = _labels(partition)
    _check_nc(labels)
    D = squareform(pdist(X))
    uniq, inv = np.unique(labels, return_inverse=True)
    sizes = np.bincount(inv)
    onehot = np.zeros((len(X), len(uniq)))
    onehot[np.arange(len(X)), inv] = 1.0
    sums = D @ onehot
    own = sizes[inv]
    a = sums[np.arange(len(X)), inv] / np.maximum(own - 1, 1)
    mean_other = sums / sizes[None, :]
    mean_other[np.arange(len(X)), inv] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    s[own == 1] = 0.0
    return s


def silhouette_index(X, partition) -> float:
    """Mean silhouette width over all objects."""
    return float(silhouette_values(X, partition).mean())


def sweep_nc(X, nc_range, restarts: int = DEFAULT_RESTARTS, seed=0, max_iter=DEFAULT_MAX_ITER):
    """k-means plus all three indices for each ``nc`` in ``nc_range``.

    The run for ``nc`` uses seed ``seed + nc``.
    """
    reports = []
    for nc in nc_range:
        part = kmeans(X, nc, restarts=restarts, max_iter=max_iter, seed=seed + nc)
        ch = ch_index(X, part) if nc < len(X) else float("nan")
        reports.append(ValidityReport(nc, ch, silhouette_index(X, part), _c_or_nan(X, part), part))
    return reports


def _c_or_nan(X, part):
    try:
        return c_index(X, part)
    except UndefinedIndexError:
        return float("nan")
