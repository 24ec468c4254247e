"""End-to-end runs (count, decompose, features, cluster, stability) and plot tables.

Seeds: everything derives from ``PipelineConfig.seed``.  Word ``i`` (in
manifest order) is fitted with ``seed + i``, k-means for ``nc`` clusters
uses ``seed + nc`` and the bootstrap uses ``seed`` itself through its own
:class:`numpy.random.SeedSequence` spawn.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .cluster import DEFAULT_RESTARTS, ValidityReport, c_index, ch_index, kmeans, silhouette_index, sweep_nc
from .decompose import DEFAULT_QUANTILE, DEFAULT_TRIM, decompose_all, default_lstar
from .errors import DataError, LagdistError
from .evaluate import bootstrap_stability
from .features import DEFAULT_EXPLAINED_VARIANCE, assemble_features, decomposition_features
from .genomescan import count_lags_file, default_max_lag, read_histograms, write_histograms
from .io import (read_decompositions, read_partition, write_decompositions, write_features,
                 write_partition, write_validity)


class StageError(LagdistError):
    """Failure inside one pipeline stage; ``cause`` is the original error."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    input: str
    out: str
    k: int = 3
    max_lag: int | None = None
    lstar: int | None = None
    trim: float = DEFAULT_TRIM
    quantile: float = DEFAULT_QUANTILE
    explained_variance: float = DEFAULT_EXPLAINED_VARIANCE
    method: int = 3
    nc: int = 2
    nc_range: tuple[int, int] | None = None
    lts_restarts: int = 10
    kmeans_restarts: int = DEFAULT_RESTARTS
    bootstrap: int = 0
    seed: int = 0
    fmt: str = "auto"
    block_weight: float = 1.0

    def resolved(self) -> "PipelineConfig":
        """Copy with per-``k`` defaults filled in, after validation."""
        cfg = PipelineConfig(**asdict(self))
        if cfg.k < 1:
            raise ValueError("k must be at least 1")
        if cfg.max_lag is None:
            cfg.max_lag = default_max_lag(cfg.k)
        if cfg.lstar is None:
            cfg.lstar = default_lstar(cfg.k) if cfg.k in (3, 5) else cfg.max_lag
        if cfg.nc_range is not None:
            cfg.nc_range = tuple(int(v) for v in cfg.nc_range)
        checks = [
            (cfg.max_lag > cfg.k, "max_lag must exceed k"),
            (cfg.k < cfg.lstar <= cfg.max_lag, "lstar must lie in (k, max_lag]"),
            (0 < cfg.trim <= 1, "trim must lie in (0, 1]"),
            (0 < cfg.quantile < 1, "quantile must lie in (0, 1)"),
            (0 < cfg.explained_variance <= 1, "explained_variance must lie in (0, 1]"),
            (cfg.method in (1, 2, 3), "method must be 1, 2 or 3"),
            (cfg.nc >= 2, "nc must be at least 2"),
            (cfg.nc_range is None or 2 <= cfg.nc_range[0] <= cfg.nc_range[1], "nc_range must satisfy 2 <= a <= b"),
            (cfg.lts_restarts >= 1 and cfg.kmeans_restarts >= 1, "restarts must be positive"),
            (cfg.bootstrap >= 0, "bootstrap must be nonnegative"),
            (cfg.block_weight > 0, "block_weight must be positive"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)
        return cfg


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (LagdistError, OSError, ValueError) as exc:
        raise StageError(name, exc) from exc


def _validity_row(X, part) -> ValidityReport:
    def safe(f):
        try:
            return f(X, part)
        except LagdistError:
            return float("nan")

    return ValidityReport(part.nc, safe(ch_index), safe(silhouette_index), safe(c_index), part)


def run_pipeline(config: PipelineConfig) -> dict:
    """Run every stage and write artifacts plus ``manifest.json`` under ``config.out``.

    Layout: ``hist/``, ``decomp/``, ``features/``, ``cluster/partition.csv``,
    ``cluster/validity.csv`` and, when ``bootstrap > 0``,
    ``cluster/stability.csv``.  Outputs of completed stages stay on disk
    when a later stage fails.  Returns the manifest dictionary.
    """
    cfg = _stage("config", config.resolved)
    out = Path(cfg.out)
    if not Path(cfg.input).is_file():
        raise StageError("count", DataError(f"input file {cfg.input} does not exist"))

    hists = _stage("count", count_lags_file, cfg.input, cfg.k, cfg.max_lag, cfg.fmt)
    _stage("count", write_histograms, hists, out / "hist")

    decs = _stage("decompose", decompose_all, hists, cfg.lstar, cfg.trim, cfg.quantile,
                  cfg.lts_restarts, cfg.seed)
    _stage("decompose", write_decompositions, decs, out / "decomp")

    words = [d.word for d in decs]
    base, peak = _stage("features", decomposition_features, decs, cfg.explained_variance)
    _stage("features", write_features, words, base, peak, out / "features")

    X = _stage("cluster", assemble_features, base, peak, cfg.method, cfg.block_weight)
    if cfg.nc_range is not None:
        reports = _stage("cluster", sweep_nc, X, range(cfg.nc_range[0], cfg.nc_range[1] + 1),
                         cfg.kmeans_restarts, cfg.seed)
    else:
        reports = []
    chosen = next((r for r in reports if r.nc == cfg.nc), None)
    if chosen is None:
        part = _stage("cluster", kmeans, X, cfg.nc, cfg.kmeans_restarts, seed=cfg.seed + cfg.nc)
        chosen = _validity_row(X, part)
        reports = sorted(reports + [chosen], key=lambda r: r.nc)
    _stage("cluster", write_partition, words, chosen.partition.labels, out / "cluster" / "partition.csv")
    _stage("cluster", write_validity, reports, out / "cluster" / "validity.csv")

    if cfg.bootstrap > 0:
        rep = _stage("stability", bootstrap_stability, X, cfg.nc, cfg.bootstrap,
                     cfg.kmeans_restarts, cfg.seed)
        _stage("stability", write_stability, rep, out / "cluster" / "stability.csv")

    manifest = {
        "config": asdict(cfg),
        "versions": {
            "lagdist": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "seed": cfg.seed,
        "seed_derivation": {"decompose": "seed + word index", "kmeans": "seed + nc",
                            "bootstrap": "SeedSequence(seed)"},
        "summary": {"words": len(words), "q_b": base.q, "q_pk": peak.q,
                    "cluster_sizes": chosen.partition.sizes.tolist()},
        "outputs": {str(p.relative_to(out)): _sha256(p)
                    for p in sorted(out.rglob("*")) if p.is_file() and p.name != "manifest.json"
                    and "plot" not in p.relative_to(out).parts},
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return manifest


def write_stability(report, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sizes = report.reference.sizes
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster", "size", "jaccard", "resamples"])
        for c, (s, j) in enumerate(zip(sizes, report.jaccard)):
            w.writerow([c, int(s), repr(float(j)), report.B])
    return path


# ---------------------------------------------------------------------------
# plot-ready tables


def cluster_medians(rows, labels) -> dict:
    """Pointwise median of ``rows`` within each cluster label."""
    rows = np.asarray(rows, dtype=float)
    labels = np.asarray(labels)
    return {lab: np.median(rows[labels == lab], axis=0) for lab in np.unique(labels)}


def _write_table(path, header, columns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([v if isinstance(v, (int, np.integer)) else repr(float(v)) for v in row])


def write_plot_tables(out_dir, histograms, decompositions, labels=None, validity=None) -> Path:
    """Decomposition tables per word, index-vs-nc table and per-cluster medians.

    ``histograms`` and ``decompositions`` are matched by word; ``labels``
    follows ``decompositions`` order.
    """
    out = Path(out_dir)
    (out / "decomposition").mkdir(parents=True, exist_ok=True)
    by_word = {h.word: h for h in histograms}
    f_rows, b_rows, p_rows = [], [], []
    for d in decompositions:
        h = by_word.get(d.word)
        if h is None:
            raise DataError(f"no histogram for word {d.word}")
        f = h.frequencies()
        f_rows.append(f)
        b_rows.append(d.baseline)
        p_rows.append(d.peak_values)
        _write_table(out / "decomposition" / f"{d.word}.csv", ["lag", "f", "fb", "fpk"],
                     [h.lags, f, d.baseline, d.peak_values])
    if validity is not None:
        _write_table(out / "validity.csv", ["nc", "ch", "silhouette", "c_index"],
                     [[r.nc for r in validity], [r.ch for r in validity],
                      [r.silhouette for r in validity], [r.c_index for r in validity]])
    if labels is not None:
        lags = decompositions[0].fit.lags
        for name, rows in (("f", f_rows), ("baseline", b_rows), ("peak", p_rows)):
            med = cluster_medians(rows, labels)
            _write_table(out / f"median_{name}.csv", ["lag"] + [f"cluster{c}" for c in med],
                         [lags] + list(med.values()))
    return out


def _read_validity(path):
    with open(path, newline="") as fh:
        return [ValidityReport(int(r["nc"]), float(r["ch"]), float(r["silhouette"]), float(r["c_index"]))
                for r in csv.DictReader(fh)]


def emit_plot_tables(run_dir, out_dir=None) -> Path:
    """Write plot tables for a finished :func:`run_pipeline` directory (default ``<run>/plot``)."""
    run = Path(run_dir)
    hists = read_histograms(run / "hist")
    decs = read_decompositions(run / "decomp")
    labels = validity = None
    part = run / "cluster" / "partition.csv"
    if part.is_file():
        mapping = read_partition(part)
        labels = [int(mapping[d.word]) for d in decs]
    if (run / "cluster" / "validity.csv").is_file():
        validity = _read_validity(run / "cluster" / "validity.csv")
    return write_plot_tables(out_dir or run / "plot", hists, decs, labels, validity)
