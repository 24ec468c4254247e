"""Factorial simulation of spiked lag distributions and the clustering study.

Three groups of distributions are generated per data set.  Five factors
set the trend (T), number of peaks (NP), peak locations (PL), peak mass
(PM) and group sizes (SS); only the 20 combinations belonging to one of
three scenarios are valid:

* scenario 1: similar baselines, distinct peaks (T=1, PL=2, PM=1)
* scenario 2: distinct baselines, similar peaks (T=2, NP=1, PL=1, PM in {1, 2})
* scenario 3: distinct baselines and peaks (T=2, PL=2)
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cluster import DEFAULT_RESTARTS, kmeans
from .decompose import DEFAULT_QUANTILE, DEFAULT_TRIM, decompose, gamma_density
from .errors import InvalidCaseError, LagdistError
from .evaluate import adjusted_rand
from .features import DEFAULT_EXPLAINED_VARIANCE, assemble_features, decomposition_features
from .genomescan import LagHistogram

DOMAIN_END = 1500
PEAK_DOMAIN_END = 1000
DRAWS = 50_000
LOCATION_HALF_WIDTH = 3
THETA_JITTER_SD = 0.01
LAMBDA_JITTER_SD = 0.00001

TREND = {
    1: ((0.8, 0.0005), (0.8, 0.0005), (0.8, 0.0005)),
    2: ((0.6, 0.0001), (0.8, 0.0005), (0.95, 0.001)),
}
N_PEAKS = {1: (10, 10, 10), 2: (20, 10, 5)}
PEAK_MASS = {1: (0.05, 0.05, 0.05), 2: (0.1, 0.05, 0.02), 3: (0.1, 0.05, 0.0)}
GROUP_SIZES = {1: (200, 200, 200), 2: (50, 150, 400)}


@dataclass(frozen=True)
class GroupParams:
    theta: float
    lam: float
    n_peaks: int
    peak_mass: float
    size: int


@dataclass(frozen=True)
class SimCase:
    """One cell of the factorial design; construction validates it."""

    T: int
    NP: int
    PL: int
    PM: int
    SS: int
    L: int = DOMAIN_END
    peak_domain_end: int = PEAK_DOMAIN_END
    draws: int = DRAWS

    def __post_init__(self):
        levels = {"T": (1, 2), "NP": (1, 2), "PL": (1, 2), "PM": (1, 2, 3), "SS": (1, 2)}
        for name, allowed in levels.items():
            if getattr(self, name) not in allowed:
                raise InvalidCaseError(f"factor {name} must be one of {allowed}")
        self.scenario  # noqa: B018 - raises on combinations outside the design

    @property
    def factors(self) -> tuple:
        return (self.T, self.NP, self.PL, self.PM, self.SS)

    @property
    def scenario(self) -> int:
        T, NP, PL, PM, _ = self.factors
        if T == 1:
            if PL == 1:
                raise InvalidCaseError(
                    f"{self.factors}: similar baselines (T=1) combined with shared peak "
                    "locations (PL=1) is not a cell of the design; scenario 1 needs PL=2")
            if PM != 1:
                raise InvalidCaseError(
                    f"{self.factors}: similar baselines (T=1) require equal peak mass (PM=1), "
                    "since the baseline scale depends on the peak mass")
            return 1
        if PL == 1:
            if NP != 1 or PM == 3:
                raise InvalidCaseError(
                    f"{self.factors}: similar peak functions (PL=1) require NP=1 and PM in {{1, 2}}")
            return 2
        return 3

    @property
    def groups(self) -> list[GroupParams]:
        n_peaks = list(N_PEAKS[self.NP])
        if self.PM == 3:
            n_peaks[2] = 0
        return [
            GroupParams(th, lam, npk, mp, size)
            for (th, lam), npk, mp, size in zip(
                TREND[self.T], n_peaks, PEAK_MASS[self.PM], GROUP_SIZES[self.SS])
        ]

    @property
    def m(self) -> int:
        return sum(g.size for g in self.groups)

    @classmethod
    def parse(cls, text: str) -> "SimCase":
        try:
            vals = [int(v) for v in text.replace(" ", "").split(",")]
        except ValueError:
            raise InvalidCaseError(f"cannot parse case {text!r}; expected T,NP,PL,PM,SS") from None
        if len(vals) != 5:
            raise InvalidCaseError(f"case {text!r} needs five factor levels T,NP,PL,PM,SS")
        return cls(*vals)


def all_cases() -> list[SimCase]:
    """The 20 valid configurations, ordered by scenario then factor levels."""
    cases = []
    for f in itertools.product((1, 2), (1, 2), (1, 2), (1, 2, 3), (1, 2)):
        try:
            cases.append(SimCase(*f))
        except InvalidCaseError:
            pass
    return sorted(cases, key=lambda c: (c.scenario, c.factors))


def build_case(T, NP, PL, PM, SS) -> SimCase:
    return SimCase(T, NP, PL, PM, SS)


@dataclass
class SimulatedDistribution:
    """Population distribution ``f`` on lags ``1..L`` with its ground truth."""

    group: int
    theta: float
    lam: float
    alpha: float
    peak_lags: np.ndarray
    peak_masses: np.ndarray
    f: np.ndarray

    @property
    def baseline(self) -> np.ndarray:
        return self.alpha * gamma_density(np.arange(1, len(self.f) + 1), self.theta, self.lam)


def draw_mean_locations(n_peaks: int, rng, peak_domain_end: int = PEAK_DOMAIN_END,
                        half_width: int = LOCATION_HALF_WIDTH) -> np.ndarray:
    """Sorted mean peak locations, pairwise at least ``2*half_width + 1`` apart.

    Locations stay ``half_width`` away from both ends of ``1..peak_domain_end``
    so jittered member peaks remain inside it.  Sampling is uniform over all
    admissible sets (gaps are removed, a plain subset is drawn, gaps are
    added back).
    """
    if n_peaks == 0:
        return np.zeros(0, dtype=np.int64)
    lo, hi = 1 + half_width, peak_domain_end - half_width
    extra = 2 * half_width
    span = hi - lo + 1 - extra * (n_peaks - 1)
    if span < n_peaks:
        raise InvalidCaseError(f"cannot place {n_peaks} separated peaks in 1..{peak_domain_end}")
    base = np.sort(rng.choice(span, size=n_peaks, replace=False))
    return lo + base + extra * np.arange(n_peaks)


def _jitter(value, sd, rng):
    while True:
        v = value + rng.normal(0.0, sd)
        if v > 0:
            return v


def gen_distribution(group: GroupParams, mean_locations, rng, group_index: int = 0,
                     L: int = DOMAIN_END, half_width: int = LOCATION_HALF_WIDTH,
                     theta_sd: float = THETA_JITTER_SD,
                     lam_sd: float = LAMBDA_JITTER_SD) -> SimulatedDistribution:
    """Draw one member of a group: jittered gamma baseline plus equal-mass peaks."""
    theta = _jitter(group.theta, theta_sd, rng)
    lam = _jitter(group.lam, lam_sd, rng)
    lags = np.arange(1, L + 1)
    fg = gamma_density(lags, theta, lam)
    alpha = (1.0 - group.peak_mass) / fg.sum()
    f = alpha * fg
    ml = np.asarray(mean_locations[: group.n_peaks], dtype=np.int64)
    if len(ml) < group.n_peaks:
        raise ValueError("fewer mean locations than peaks")
    peak_lags = ml + rng.integers(-half_width, half_width + 1, size=len(ml))
    masses = np.full(len(ml), group.peak_mass / len(ml) if len(ml) else 0.0)
    np.add.at(f, peak_lags - 1, masses)
    if abs(f.sum() - 1.0) > 1e-9:
        raise AssertionError(f"simulated distribution sums to {f.sum()!r}")
    return SimulatedDistribution(group_index, theta, lam, alpha, peak_lags, masses, f)


def sample_empirical(f, draws: int = DRAWS, rng=None) -> np.ndarray:
    """Counts of ``draws`` inverse-CDF samples ``min{j : F(j) >= u}`` from ``f``.

    The uniforms are produced already sorted (normalised exponential
    spacings give the order statistics of i.i.d. uniforms), so the count at
    lag ``j`` is the number of uniforms in ``(F(j-1), F(j)]``.
    """
    rng = np.random.default_rng(rng)
    F = np.cumsum(f)
    # F[-1] may fall a rounding error short of 1; the last lag takes the rest
    F[-1] = 1.0
    gaps = rng.standard_exponential(draws + 1)
    u = np.cumsum(gaps[:-1]) / gaps.sum()
    below = np.searchsorted(u, F, side="right")
    return np.diff(below, prepend=0)


@dataclass
class SimDataset:
    case: SimCase
    labels: np.ndarray
    counts: np.ndarray
    truth: list
    mean_locations: list

    def histograms(self) -> list[LagHistogram]:
        return [LagHistogram(f"d{i:04d}", 0, self.case.L, c) for i, c in enumerate(self.counts)]


def generate_dataset(case: SimCase, rng, theta_sd=THETA_JITTER_SD, lam_sd=LAMBDA_JITTER_SD) -> SimDataset:
    rng = np.random.default_rng(rng)
    groups = case.groups
    if case.PL == 1:
        shared = draw_mean_locations(max(g.n_peaks for g in groups), rng, case.peak_domain_end)
        locations = [shared for _ in groups]
    else:
        locations = [draw_mean_locations(g.n_peaks, rng, case.peak_domain_end) for g in groups]
    labels, counts, truth = [], [], []
    for gi, (g, ml) in enumerate(zip(groups, locations)):
        for _ in range(g.size):
            d = gen_distribution(g, ml, rng, gi, case.L, theta_sd=theta_sd, lam_sd=lam_sd)
            truth.append(d)
            counts.append(sample_empirical(d.f, case.draws, rng))
            labels.append(gi)
    return SimDataset(case, np.array(labels), np.vstack(counts), truth, locations)


# ---------------------------------------------------------------------------
# study


@dataclass
class StudySettings:
    lstar: int | None = None
    trim: float = DEFAULT_TRIM
    quantile: float = DEFAULT_QUANTILE
    explained_variance: float = DEFAULT_EXPLAINED_VARIANCE
    lts_restarts: int = 2
    kmeans_restarts: int = DEFAULT_RESTARTS
    theta_sd: float = THETA_JITTER_SD
    lam_sd: float = LAMBDA_JITTER_SD


@dataclass
class ReplicaResult:
    ari: dict
    q_b: int
    q_pk: int
    error: str | None = None


@dataclass
class CaseResult:
    case: SimCase
    methods: tuple
    replicas: list = field(default_factory=list)

    def ari(self, method) -> np.ndarray:
        return np.array([r.ari[method] for r in self.replicas
                         if r.error is None and not math.isnan(r.ari.get(method, math.nan))])

    def mean_ari(self, method) -> float:
        a = self.ari(method)
        return float(a.mean()) if len(a) else math.nan

    def sd_ari(self, method) -> float:
        a = self.ari(method)
        return float(a.std(ddof=1)) if len(a) > 1 else math.nan

    @property
    def failures(self) -> list:
        return [r.error for r in self.replicas if r.error is not None]

    def _q(self, attr):
        qs = [getattr(r, attr) for r in self.replicas if r.error is None]
        return float(np.mean(qs)) if qs else math.nan

    @property
    def q_b(self) -> float:
        return self._q("q_b")

    @property
    def q_pk(self) -> float:
        return self._q("q_pk")


def _case_seed(seed, case, replica):
    return np.random.SeedSequence([seed, *case.factors, replica])


def run_replica(case: SimCase, seed_seq, methods=(1, 2, 3), settings: StudySettings | None = None) -> ReplicaResult:
    """Generate one data set, decompose, reduce, cluster into 3 groups, score by ARI."""
    s = settings or StudySettings()
    data_seed, fit_seed, km_seed = seed_seq.spawn(3)
    data = generate_dataset(case, data_seed, s.theta_sd, s.lam_sd)
    fit_seeds = fit_seed.generate_state(case.m)
    decs = [
        decompose(h, s.lstar, trim=s.trim, p=s.quantile, restarts=s.lts_restarts, seed=int(fs))
        for h, fs in zip(data.histograms(), fit_seeds)
    ]
    base, peak = decomposition_features(decs, s.explained_variance)
    ari = {}
    km_seeds = km_seed.spawn(len(methods))
    for method, ks in zip(methods, km_seeds):
        X = assemble_features(base, peak, method)
        try:
            part = kmeans(X, len(case.groups), restarts=s.kmeans_restarts, seed=ks)
            ari[method] = adjusted_rand(part, data.labels)
        except LagdistError:
            ari[method] = math.nan
    return ReplicaResult(ari, base.q, peak.q)


def run_study(cases, replicas: int = 100, methods=(1, 2, 3), seed: int = 0,
              settings: StudySettings | None = None, progress=None) -> list[CaseResult]:
    """ARI of each clustering method over ``replicas`` data sets per case.

    Replica ``r`` of a case is seeded from ``(seed, T, NP, PL, PM, SS, r)``,
    so results do not depend on which other cases run alongside.  A replica
    that raises is kept with its error message rather than dropped.
    """
    results = []
    for case in cases:
        res = CaseResult(case, tuple(methods))
        for r in range(replicas):
            try:
                rep = run_replica(case, _case_seed(seed, case, r), methods, settings)
            except LagdistError as exc:
                rep = ReplicaResult({}, 0, 0, f"{type(exc).__name__}: {exc}")
            res.replicas.append(rep)
            if progress is not None:
                progress(case, r, rep)
        results.append(res)
    return results


def study_table(results) -> list[dict]:
    rows = []
    for res in results:
        row = dict(zip(("T", "NP", "PL", "PM", "SS"), res.case.factors))
        row["scenario"] = res.case.scenario
        for m in res.methods:
            row[f"method{m}_mean"] = round(res.mean_ari(m), 6)
            row[f"method{m}_sd"] = round(res.sd_ari(m), 6)
        row["pc_b"] = res.q_b
        row["pc_pk"] = res.q_pk
        row["replicas_ok"] = len(res.replicas) - len(res.failures)
        row["replicas_failed"] = len(res.failures)
        rows.append(row)
    return rows


def write_study_table(results, path) -> Path:
    rows = study_table(results)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return path
