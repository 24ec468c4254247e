"""CDF conversion and PCA score extraction for baselines and peak functions."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

DEFAULT_EXPLAINED_VARIANCE = 0.90


@dataclass
class CdfVector:
    values: np.ndarray
    terminal_mass: float


@dataclass
class ScoreMatrix:
    """PCA scores of ``m`` rows on the ``q`` retained components.

    ``components`` is ``q x d`` (rows are unit loadings) and ``column_means``
    the centring vector, so ``scores @ components + column_means``
    approximates the input.  ``variance_ratio`` covers every component;
    ``explained_variance_ratio`` only the retained ones.
    """

    scores: np.ndarray
    components: np.ndarray
    column_means: np.ndarray
    variance_ratio: np.ndarray
    total_variance: float

    @property
    def q(self) -> int:
        return self.scores.shape[1]

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        return self.variance_ratio[: self.q]

    @property
    def discarded_variance(self) -> float:
        """Total variance (sum of column variances, ddof=1) not retained."""
        return float(self.total_variance * (1.0 - self.explained_variance_ratio.sum()))

    def reconstruct(self) -> np.ndarray:
        return self.scores @ self.components + self.column_means

    def transform(self, rows) -> np.ndarray:
        return (np.asarray(rows, dtype=float) - self.column_means) @ self.components.T


def to_cdf(density) -> CdfVector:
    """Running sum of a nonnegative per-lag density."""
    density = np.asarray(density, dtype=float)
    if np.any(density < 0):
        raise ValueError("density values must be nonnegative")
    values = np.cumsum(density)
    return CdfVector(values, float(values[-1]) if len(values) else 0.0)


def cdf_rows(matrix) -> np.ndarray:
    """Row-wise :func:`to_cdf` of an ``m x d`` matrix."""
    matrix = np.asarray(matrix, dtype=float)
    if np.any(matrix < 0):
        raise ValueError("density values must be nonnegative")
    return np.cumsum(matrix, axis=1)


def pca_reduce(rows, variance_threshold: float = DEFAULT_EXPLAINED_VARIANCE) -> ScoreMatrix:
    """Centre (without scaling) and keep the fewest components reaching the threshold.

    Signs are fixed so that the largest-magnitude loading of each component
    is positive.  A matrix with identical rows yields ``q = 0`` and a
    ``RuntimeWarning``.
    """
    X = np.asarray(rows, dtype=float)
    if X.ndim != 2:
        raise ValueError("rows must be a 2-D matrix")
    m, d = X.shape
    if m < 2 or d < 1:
        raise ValueError("PCA needs at least 2 rows and 1 column")
    if not 0 < variance_threshold <= 1:
        raise ValueError("variance_threshold must lie in (0, 1]")

    means = X.mean(axis=0)
    Xc = X - means
    U, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    var = s**2 / (m - 1)
    total = float(var.sum())
    # singular values below round-off carry no variance
    tol = max(m, d) * np.finfo(float).eps * (s[0] if len(s) else 0.0)
    if len(s) == 0 or s[0] <= tol or total <= 0:
        warnings.warn("all rows are identical; PCA retains no component", RuntimeWarning, stacklevel=2)
        return ScoreMatrix(np.zeros((m, 0)), np.zeros((0, d)), means, np.zeros(0), 0.0)

    ratio = var / total
    cum = np.cumsum(ratio)
    # guard against the threshold being missed only through rounding
    q = int(np.searchsorted(cum, variance_threshold - 1e-12) + 1)
    q = min(q, int(np.sum(s > tol)))

    comps = Vt[:q]
    flip = np.sign(comps[np.arange(q), np.argmax(np.abs(comps), axis=1)])
    flip[flip == 0] = 1.0
    comps = comps * flip[:, None]
    scores = U[:, :q] * (s[:q] * flip)
    return ScoreMatrix(scores, comps, means, ratio, total)


def assemble_features(baseline_scores, peak_scores, method: int, block_weight: float = 1.0) -> np.ndarray:
    """Feature matrix for clustering method 1 (peaks), 2 (baselines) or 3 (both).

    Method 3 stacks baseline columns then peak columns; ``block_weight``
    multiplies the peak block and defaults to 1 (no rescaling).
    """
    B = np.asarray(getattr(baseline_scores, "scores", baseline_scores), dtype=float)
    P = np.asarray(getattr(peak_scores, "scores", peak_scores), dtype=float)
    if B.shape[0] != P.shape[0]:
        raise ValueError(f"row count mismatch: {B.shape[0]} baselines vs {P.shape[0]} peaks")
    if method == 1:
        return P.copy()
    if method == 2:
        return B.copy()
    if method == 3:
        return np.hstack([B, block_weight * P])
    raise ValueError(f"method must be 1, 2 or 3, got {method!r}")


def decomposition_features(decompositions, variance_threshold=DEFAULT_EXPLAINED_VARIANCE):
    """Baseline and peak :class:`ScoreMatrix` of a list of decompositions."""
    base = cdf_rows(np.vstack([d.baseline for d in decompositions]))
    peak = cdf_rows(np.vstack([d.peak_values for d in decompositions]))
    return pca_reduce(base, variance_threshold), pca_reduce(peak, variance_threshold)
