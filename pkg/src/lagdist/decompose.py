"""Baseline/peak decomposition of a lag histogram.

The baseline is a scaled gamma density ``alpha * f_gamma(j; theta, lam)``
fitted by least trimmed squares on the square-root scale, where Poisson
counts have roughly constant spread.  Lags whose observed count exceeds a
high Poisson quantile of the fitted expectation form the peak function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.special import digamma, gammaln, ndtri, pdtr

from .errors import FitError
from .genomescan import LagHistogram

DEFAULT_TRIM = 0.95
DEFAULT_QUANTILE = 0.99
DEFAULT_LSTAR = {3: 200, 5: 1500}
MAX_CSTEPS = 50
JITTER_SD = 0.3


@dataclass(frozen=True)
class GammaParams:
    alpha: float
    theta: float
    lam: float

    def __post_init__(self):
        if not (self.alpha >= 0 and self.theta > 0 and self.lam > 0):
            raise ValueError(f"invalid gamma parameters {self}")

    def curve(self, lags) -> np.ndarray:
        """Baseline relative frequencies ``alpha * f_gamma`` at ``lags``."""
        return self.alpha * gamma_density(lags, self.theta, self.lam)


@dataclass
class BaselineFit:
    """Result of :func:`fit_baseline_lts`.

    ``curve`` covers the full lag domain of the histogram; the trimmed fit
    itself only used lags up to ``fit_domain_end``.
    """

    params: GammaParams
    lags: np.ndarray
    curve: np.ndarray
    lts_objective: float
    h: int
    fit_domain_end: int
    start_objectives: list = field(default_factory=list)
    objective_trace: list = field(default_factory=list)
    n_steps: int = 0

    @property
    def mass(self) -> float:
        return float(self.curve.sum())


@dataclass
class PeakFunction:
    """Excess relative frequency above the baseline at flagged lags.

    Stored densely over the lag domain; ``values`` is zero off ``flagged``.
    """

    lags: np.ndarray
    values: np.ndarray
    flagged: np.ndarray
    thresholds: np.ndarray | None = None

    @property
    def mass(self) -> float:
        return float(self.values.sum())

    @property
    def flagged_lags(self) -> np.ndarray:
        return self.lags[self.flagged]

    def as_dict(self) -> dict[int, float]:
        return {int(j): float(v) for j, v in zip(self.lags[self.flagged], self.values[self.flagged])}


def default_lstar(k: int) -> int:
    try:
        return DEFAULT_LSTAR[k]
    except KeyError:
        raise ValueError(f"no default L* for k={k}; pass one explicitly") from None


def _log_gamma_density(x, theta, lam):
    return theta * np.log(lam) + (theta - 1.0) * np.log(x) - lam * x - gammaln(theta)


def gamma_density(x, theta: float, lam: float):
    """Gamma pdf with shape ``theta`` and rate ``lam``, evaluated in log space."""
    if not (theta > 0 and lam > 0):
        raise ValueError("theta and lam must be positive")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("gamma density is evaluated at positive x only")
    out = np.exp(_log_gamma_density(x, theta, lam))
    return float(out) if out.ndim == 0 else out


def residual(f_ob, fb, n):
    """Square-root scale residual ``sqrt(f_ob) - sqrt(n * fb)``."""
    return np.sqrt(f_ob) - np.sqrt(np.multiply(n, fb))


# ---------------------------------------------------------------------------
# least trimmed squares


class _SqrtGammaModel:
    """``sqrt(n * alpha * f_gamma(j))`` in log-parameters ``(log a, log t, log l)``."""

    def __init__(self, lags, n):
        self.lags = np.asarray(lags, dtype=float)
        self.log_lags = np.log(self.lags)
        self.log_n = math.log(n)

    def value(self, p, idx=slice(None)):
        la, lt, ll = p
        t, lam = math.exp(lt), math.exp(ll)
        j, lj = self.lags[idx], self.log_lags[idx]
        return np.exp(0.5 * (self.log_n + la + t * ll + (t - 1.0) * lj - lam * j - gammaln(t)))

    def jacobian(self, p, idx=slice(None)):
        la, lt, ll = p
        t, lam = math.exp(lt), math.exp(ll)
        j, lj = self.lags[idx], self.log_lags[idx]
        g = self.value(p, idx)
        d_t = t * (ll + lj - digamma(t))
        d_l = t - lam * j
        return 0.5 * np.column_stack([g, g * d_t, g * d_l])


def _moment_start(lags, counts, n):
    """Method of moments on the truncated histogram; alpha matches its mass."""
    w = counts / counts.sum()
    mean = float(w @ lags)
    var = float(w @ (lags - mean) ** 2)
    if not var > 0:
        var = max(mean, 1.0)
    theta = mean * mean / var
    lam = mean / var
    alpha = (counts.sum() / n) / max(gamma_density(lags, theta, lam).sum(), 1e-300)
    return np.log([alpha, theta, lam])


def _trimmed(sq, h):
    idx = np.argpartition(sq, h - 1)[:h]
    return np.sort(idx)


def _refit(model, y, p, idx):
    def fun(q):
        return model.value(q, idx) - y[idx]

    def jac(q):
        return model.jacobian(q, idx)

    with np.errstate(over="ignore", invalid="ignore"):
        res = least_squares(fun, p, jac=jac, method="lm", xtol=1e-10, ftol=1e-10)
    return res


def _concentrate(model, y, h, p0, max_steps):
    """C-steps from ``p0``; returns (params, objective, trace, steps)."""
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            r = y - model.value(p0)
    except OverflowError as exc:
        raise FloatingPointError("start outside the representable range") from exc
    sq = r * r
    if not np.all(np.isfinite(sq)):
        raise FloatingPointError("non-finite residuals at start")
    idx = _trimmed(sq, h)
    p = np.asarray(p0, dtype=float)
    obj = float(sq[idx].sum())
    trace = [obj]
    steps = 0
    for steps in range(1, max_steps + 1):
        try:
            res = _refit(model, y, p, idx)
        except (OverflowError, ValueError, FloatingPointError):
            # the solver wandered out of range; this start stops here
            break
        if not np.all(np.isfinite(res.x)) or res.status < 0:
            break
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                r = y - model.value(res.x)
        except OverflowError:
            break
        sq = r * r
        if not np.all(np.isfinite(sq)):
            break
        new_idx = _trimmed(sq, h)
        new_obj = float(sq[new_idx].sum())
        if new_obj > obj:
            # the refit did not improve on the subset; keep the previous iterate
            break
        p, obj = res.x, new_obj
        trace.append(obj)
        if np.array_equal(new_idx, idx):
            break
        idx = new_idx
    return p, obj, trace, steps


def fit_baseline_lts(
    hist: LagHistogram,
    lstar: int | None = None,
    trim: float = DEFAULT_TRIM,
    restarts: int = 10,
    seed=None,
    max_steps: int = MAX_CSTEPS,
) -> BaselineFit:
    """Robust scaled-gamma baseline of a lag histogram.

    Minimises the sum of the ``h = floor(trim * m)`` smallest squared
    square-root residuals over the ``m`` lags ``k+1 .. lstar``.  Each start
    runs concentration steps (refit on the current best ``h`` lags, then
    reselect) until the subset stops changing.  The first start is the
    method-of-moments estimate on the truncated histogram; the remaining
    ``restarts - 1`` starts jitter it multiplicatively (lognormal, sd 0.3).
    The start with the lowest trimmed objective wins.

    Parameters
    ----------
    hist : LagHistogram
    lstar : int, optional
        Last lag used by the fit, ``k+1 < lstar <= max_lag``.  Defaults to
        200 for k=3, 1500 for k=5, and ``max_lag`` otherwise.
    trim : float
        Fraction of fit-domain lags kept, in ``(0.5, 1]``.
    restarts : int
        Total number of starts.
    seed : int or numpy Generator, optional
        Source of the start jitter.
    """
    k, L = hist.k, hist.max_lag
    if lstar is None:
        lstar = DEFAULT_LSTAR.get(k, L)
    if not (k + 1 < lstar <= L):
        raise ValueError(f"lstar must satisfy {k + 1} < lstar <= {L}, got {lstar}")
    if not (0.5 < trim <= 1.0):
        raise ValueError("trim must lie in (0.5, 1]")
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    n = hist.n
    if n == 0:
        raise FitError(f"cannot fit baseline of {hist.word!r}: no recorded lags")

    lags = hist.lags.astype(float)
    m = lstar - k
    fit_lags, fit_counts = lags[:m], hist.counts[:m].astype(float)
    if fit_counts.sum() == 0:
        raise FitError(f"cannot fit baseline of {hist.word!r}: no lags up to L*={lstar}")
    h = int(math.floor(trim * m))
    y = np.sqrt(fit_counts)
    model = _SqrtGammaModel(fit_lags, n)
    rng = np.random.default_rng(seed)

    p0 = _moment_start(fit_lags, fit_counts, n)
    starts = [p0] + [p0 + rng.normal(0.0, JITTER_SD, 3) for _ in range(restarts - 1)]

    best, diagnostics = None, []
    for i, start in enumerate(starts):
        try:
            p, obj, trace, steps = _concentrate(model, y, h, start, max_steps)
        except (FloatingPointError, ValueError) as exc:
            diagnostics.append({"start": i, "error": str(exc)})
            continue
        diagnostics.append({"start": i, "objective": obj, "steps": steps})
        if best is None or obj < best[1]:
            best = (p, obj, trace, steps)
    if best is None:
        raise FitError(f"baseline fit of {hist.word!r} failed from every start", {"starts": diagnostics})

    p, obj, trace, steps = best
    alpha, theta, lam = np.exp(p)
    try:
        params = GammaParams(float(alpha), float(theta), float(lam))
        curve = params.curve(lags)
    except ValueError as exc:
        raise FitError(str(exc), {"starts": diagnostics}) from exc
    if not np.all(np.isfinite(curve)):
        raise FitError(f"baseline of {hist.word!r} is not finite", {"starts": diagnostics})
    return BaselineFit(
        params=params,
        lags=hist.lags,
        curve=curve,
        lts_objective=obj,
        h=h,
        fit_domain_end=lstar,
        start_objectives=[d["objective"] for d in diagnostics if "objective" in d],
        objective_trace=trace,
        n_steps=steps,
    )


def lts_objective(hist: LagHistogram, params: GammaParams, lstar: int, trim: float = DEFAULT_TRIM) -> float:
    """Sum of the ``h`` smallest squared residuals of ``params`` on ``k+1 .. lstar``."""
    m = lstar - hist.k
    h = int(math.floor(trim * m))
    r = residual(hist.counts[:m], params.curve(hist.lags[:m]), hist.n)
    return float(np.sort(r * r)[:h].sum())


# ---------------------------------------------------------------------------
# peaks


def poisson_quantile(mean: float, p: float) -> int:
    """Smallest integer ``Q`` with ``P(X <= Q) >= p`` for ``X ~ Poisson(mean)``.

    The pmf is built outward from the mode with the ratio recurrences
    ``pmf(x+1) = pmf(x) * mean / (x+1)`` and ``pmf(x-1) = pmf(x) * x / mean``,
    then summed from the far left tail, where the omitted mass is far below
    double precision.
    """
    if not mean > 0:
        raise ValueError("mean must be positive")
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    mode = math.floor(mean)
    sd = math.sqrt(mean)
    lo = max(0, int(mode - 40 * sd - 40))
    hi = int(mode + 40 * sd + 40)
    log_pmf_mode = mode * math.log(mean) - mean - math.lgamma(mode + 1)
    pmf = np.empty(hi - lo + 1)
    i_mode = mode - lo
    pmf[i_mode] = math.exp(log_pmf_mode)
    # the recurrences are cumulative products of ratios
    if i_mode > 0:
        x = np.arange(mode, lo, -1, dtype=float)
        pmf[:i_mode] = (pmf[i_mode] * np.cumprod(x / mean))[::-1]
    if hi > mode:
        x = np.arange(mode + 1, hi + 1, dtype=float)
        pmf[i_mode + 1:] = pmf[i_mode] * np.cumprod(mean / x)
    cdf = np.cumsum(pmf)
    hit = np.flatnonzero(cdf >= p)
    if len(hit) == 0:  # pragma: no cover - p too close to 1 for double precision
        return hi
    return lo + int(hit[0])


def poisson_quantiles(means, p: float) -> np.ndarray:
    """Vectorised :func:`poisson_quantile`; a mean of zero gives ``Q = 0``.

    A Cornish-Fisher guess is corrected step by step until
    ``CDF(Q) >= p > CDF(Q - 1)`` holds, with the CDF taken from the
    regularised incomplete gamma function.
    """
    means = np.asarray(means, dtype=float)
    if np.any(means < 0):
        raise ValueError("means must be nonnegative")
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    q = np.zeros(means.shape, dtype=np.int64)
    pos = means > 0
    if not np.any(pos):
        return q
    mu = means[pos]
    z = ndtri(p)
    guess = np.maximum(np.floor(mu + z * np.sqrt(mu) + (z * z - 1.0) / 6.0), 0).astype(np.int64)
    while True:
        up = pdtr(guess, mu) < p
        if not up.any():
            break
        guess[up] += 1
    while True:
        down = (guess > 0) & (pdtr(guess - 1, mu) >= p)
        if not down.any():
            break
        guess[down] -= 1
    q[pos] = guess
    return q


def extract_peaks(hist: LagHistogram, fit: BaselineFit, p: float = DEFAULT_QUANTILE) -> PeakFunction:
    """Flag lags with ``f_ob(j) > Q(j)`` and keep their excess ``f(j) - fb(j)``.

    ``Q(j)`` is the ``p`` quantile of a Poisson with mean ``n * fb(j)``; where
    the baseline underflows to zero any positive count is flagged.
    """
    if len(fit.curve) != len(hist.counts):
        raise ValueError("baseline fit does not cover the histogram's lag domain")
    n = hist.n
    f = hist.frequencies()
    q = poisson_quantiles(n * fit.curve, p)
    flagged = (hist.counts > q) & (f > fit.curve)
    values = np.where(flagged, f - fit.curve, 0.0)
    return PeakFunction(hist.lags, values, flagged, q)


@dataclass
class Decomposition:
    """Baseline fit and peak function of one word."""

    word: str
    k: int
    max_lag: int
    n: int
    fit: BaselineFit
    peaks: PeakFunction

    @property
    def baseline(self) -> np.ndarray:
        return self.fit.curve

    @property
    def peak_values(self) -> np.ndarray:
        return self.peaks.values


def decompose(
    hist: LagHistogram,
    lstar: int | None = None,
    trim: float = DEFAULT_TRIM,
    p: float = DEFAULT_QUANTILE,
    restarts: int = 10,
    seed=None,
) -> Decomposition:
    fit = fit_baseline_lts(hist, lstar, trim=trim, restarts=restarts, seed=seed)
    peaks = extract_peaks(hist, fit, p)
    return Decomposition(hist.word, hist.k, hist.max_lag, hist.n, fit, peaks)


def decompose_all(histograms, lstar=None, trim=DEFAULT_TRIM, p=DEFAULT_QUANTILE, restarts=10, seed=0):
    """Decompose every histogram; word ``i`` is fitted with seed ``seed + i``."""
    return [
        decompose(h, lstar, trim=trim, p=p, restarts=restarts, seed=seed + i)
        for i, h in enumerate(histograms)
    ]
