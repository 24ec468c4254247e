import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import ortho_group

from lagdist.cluster import (c_index, ch_index, kmeans, lloyd, silhouette_index, silhouette_values,
                             sweep_nc, within_ss)
from lagdist.errors import DegenerateInputError, UndefinedIndexError
from lagdist.evaluate import adjusted_rand


def blobs(rng, sizes, sep=10.0, sd=1.0, dim=2):
    centers = rng.normal(size=(len(sizes), dim))
    centers *= sep * sd / np.min([np.linalg.norm(a - b) for a, b in itertools.combinations(centers, 2)])
    X = np.vstack([c + rng.normal(0, sd, (s, dim)) for c, s in zip(centers, sizes)])
    y = np.repeat(np.arange(len(sizes)), sizes)
    return X, y


# brute-force references --------------------------------------------------


def ch_brute(X, y):
    m, labs = len(X), sorted(set(y))
    g = X.mean(0)
    B = W = 0.0
    for c in labs:
        pts = X[y == c]
        mu = pts.mean(0)
        B += len(pts) * np.sum((mu - g) ** 2)
        W += np.sum((pts - mu) ** 2)
    return (B / (len(labs) - 1)) / (W / (m - len(labs)))


def c_brute(X, y):
    pairs = list(itertools.combinations(range(len(X)), 2))
    d = sorted(math.dist(X[i], X[j]) for i, j in pairs)
    sw = sum(math.dist(X[i], X[j]) for i, j in pairs if y[i] == y[j])
    N = sum(1 for i, j in pairs if y[i] == y[j])
    return (sw - sum(d[:N])) / (sum(d[-N:]) - sum(d[:N]))


def sil_brute(X, y):
    out = []
    for i in range(len(X)):
        own = [math.dist(X[i], X[j]) for j in range(len(X)) if y[j] == y[i] and j != i]
        if not own:
            out.append(0.0)
            continue
        a = sum(own) / len(own)
        b = min(np.mean([math.dist(X[i], X[j]) for j in range(len(X)) if y[j] == c])
                for c in set(y) if c != y[i])
        out.append((b - a) / max(a, b))
    return float(np.mean(out))


FIXED = [
    (np.array([[0, 0], [1, 0], [0, 1], [5, 5], [6, 5], [5, 7.0]]), np.array([0, 0, 0, 1, 1, 1])),
    (np.array([[0, 0], [1, 2], [3, 1], [4, 4], [2, 2], [7, 1], [0, 5], [6, 6.0]]),
     np.array([0, 1, 0, 2, 1, 2, 0, 2])),
    (np.array([[1.5], [2], [2.2], [9], [9.5], [3.0], [10]]), np.array([0, 0, 0, 1, 1, 1, 2])),
]


@pytest.mark.parametrize("X,y", FIXED)
def test_indices_match_brute_force(X, y):
    assert ch_index(X, y) == pytest.approx(ch_brute(X, y), rel=1e-10)
    assert c_index(X, y) == pytest.approx(c_brute(X, y), rel=1e-10, abs=1e-12)
    assert silhouette_index(X, y) == pytest.approx(sil_brute(X, y), rel=1e-10, abs=1e-12)


def test_random_small_instances():
    rng = np.random.default_rng(4)
    for _ in range(30):
        m = int(rng.integers(4, 9))
        X = rng.normal(size=(m, 3))
        y = rng.integers(0, 3, m)
        if len(set(y)) < 2:
            continue
        assert c_index(X, y) == pytest.approx(c_brute(X, y), rel=1e-10, abs=1e-12)
        assert silhouette_index(X, y) == pytest.approx(sil_brute(X, y), rel=1e-10, abs=1e-12)
        if len(set(y)) < m:
            assert ch_index(X, y) == pytest.approx(ch_brute(X, y), rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 25), st.integers(2, 5), st.integers(1, 4), st.integers(0, 10_000))
def test_index_ranges(m, nc, dim, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(m, dim)) * rng.uniform(0.01, 100)
    y = rng.integers(0, nc, m)
    if len(set(y)) < 2:
        return
    s = silhouette_values(X, y)
    assert np.all((s >= -1) & (s <= 1))
    if len(set(y)) < m:
        assert 0.0 <= c_index(X, y) <= 1.0
    if len(set(y)) < m:
        assert ch_index(X, y) >= 0


def test_invariances():
    rng = np.random.default_rng(5)
    X, y = blobs(rng, [6, 7, 5], sep=3, dim=4)
    Q = ortho_group.rvs(4, random_state=1)
    Z = X @ Q + rng.normal(size=4) * 50
    perm = np.array([2, 0, 1])[y]
    for f in (ch_index, c_index, silhouette_index):
        base = f(X, y)
        assert f(Z, y) == pytest.approx(base, rel=1e-8, abs=1e-8)
        assert f(X, perm) == pytest.approx(base, rel=1e-12, abs=1e-12)


def test_ch_limits_and_anova():
    X = np.array([[0, 0], [0, 0], [3, 3], [3, 3.0]])
    assert ch_index(X, [0, 0, 1, 1]) == math.inf
    with pytest.raises(UndefinedIndexError):
        ch_index(X, [0, 0, 0, 0])
    rng = np.random.default_rng(6)
    X, y = blobs(rng, [10, 10], sep=4)
    part = kmeans(X, 2, restarts=5, seed=0)
    total = ((X - X.mean(0)) ** 2).sum()
    W = within_ss(X, part.labels)
    sizes = part.sizes
    B = sum(sizes[c] * ((X[part.labels == c].mean(0) - X.mean(0)) ** 2).sum() for c in range(2))
    assert B + W == pytest.approx(total)
    assert part.objective == pytest.approx(W)
    assert ch_index(X, y) > ch_index(X, rng.permutation(y))


def test_c_index_zero_for_closest_pairs_and_errors():
    X = np.array([[0.0], [0.1], [10], [10.1]])
    assert c_index(X, [0, 0, 1, 1]) == 0.0
    with pytest.raises(UndefinedIndexError):
        c_index(X, [0, 0, 0, 0])
    with pytest.raises(UndefinedIndexError):
        c_index(np.zeros((4, 2)), [0, 0, 1, 1])


def test_silhouette_singletons_and_blobs():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(5, 2))
    assert silhouette_index(X, np.arange(5)) == 0.0
    # two uniform blobs of width 1 whose centres are 20 widths apart
    X = np.vstack([rng.uniform(0, 1, (30, 2)), rng.uniform(0, 1, (30, 2)) + [20.0, 0.0]])
    y = np.repeat([0, 1], 30)
    assert silhouette_index(X, y) >= 0.95
    with pytest.raises(UndefinedIndexError):
        silhouette_index(X, np.zeros(60, int))


def test_kmeans_recovers_blobs():
    rng = np.random.default_rng(8)
    X, y = blobs(rng, [40, 50, 60], sep=10)
    part = kmeans(X, 3, restarts=10, seed=1)
    assert adjusted_rand(part, y) == 1.0
    assert part.objective <= min(part.restart_objectives) + 1e-12
    assert np.all(part.sizes > 0)
    assert part.objective == pytest.approx(((X - part.centers[part.labels]) ** 2).sum())


def test_kmeans_nc_equals_m():
    X = np.random.default_rng(9).normal(size=(6, 2))
    part = kmeans(X, 6, restarts=3, seed=0)
    assert part.objective == 0.0 and sorted(part.sizes) == [1] * 6


def test_kmeans_errors_and_determinism():
    X = np.array([[0, 0], [0, 0], [1, 1.0]])
    with pytest.raises(DegenerateInputError):
        kmeans(X, 3)
    with pytest.raises(ValueError):
        kmeans(X, 1)
    Y = np.random.default_rng(10).normal(size=(50, 3))
    a, b = kmeans(Y, 4, restarts=5, seed=3), kmeans(Y, 4, restarts=5, seed=3)
    assert np.array_equal(a.labels, b.labels)


@settings(max_examples=40, deadline=None)
@given(st.integers(5, 60), st.integers(2, 5), st.integers(0, 10_000))
def test_lloyd_monotone(m, nc, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(m, 2))
    trace = []
    init = X[rng.choice(m, nc, replace=False)]
    labels, C, obj = lloyd(X, init, 100, trace)
    assert np.all(np.diff(trace) <= 1e-9 * (1 + trace[0]))
    assert len(set(labels.tolist())) == nc


def test_empty_cluster_repair():
    # the third centre is far from every point and would end up empty
    X = np.array([[0, 0], [0.1, 0], [5, 5], [5.1, 5], [5, 5.2]])
    labels, C, _ = lloyd(X, np.array([[0, 0], [5, 5], [100, 100.0]]))
    assert sorted(np.bincount(labels, minlength=3).tolist())[0] >= 1


def test_sweep_recovers_three_groups():
    rng = np.random.default_rng(11)
    X, _ = blobs(rng, [30, 40, 50], sep=8)
    reports = sweep_nc(X, range(2, 11), restarts=5)
    assert [r.nc for r in reports] == list(range(2, 11))
    assert max(reports, key=lambda r: r.ch).nc == 3
