"""On-disk formats for decompositions, PCA scores, partitions and index tables."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .decompose import BaselineFit, Decomposition, GammaParams, PeakFunction
from .errors import DataError


def _mkdir(path) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create directory {path}: {exc}") from exc
    return path


# ---------------------------------------------------------------------------
# decompositions


def decomposition_record(d: Decomposition) -> dict:
    p = d.fit.params
    return {
        "word": d.word,
        "k": d.k,
        "L": d.max_lag,
        "n": d.n,
        "alpha": p.alpha,
        "theta": p.theta,
        "lambda": p.lam,
        "m_b": d.fit.mass,
        "m_pk": d.peaks.mass,
        "lts_objective": d.fit.lts_objective,
        "h": d.fit.h,
        "lstar": d.fit.fit_domain_end,
        "peaks": [[lag, val] for lag, val in d.peaks.as_dict().items()],
    }


def decomposition_from_record(rec: dict) -> Decomposition:
    k, L = int(rec["k"]), int(rec["L"])
    lags = np.arange(k + 1, L + 1)
    params = GammaParams(float(rec["alpha"]), float(rec["theta"]), float(rec["lambda"]))
    fit = BaselineFit(params, lags, params.curve(lags), float(rec["lts_objective"]),
                      int(rec["h"]), int(rec["lstar"]))
    values = np.zeros(L - k)
    for lag, val in rec["peaks"]:
        values[int(lag) - k - 1] = float(val)
    peaks = PeakFunction(lags, values, values > 0)
    return Decomposition(rec["word"], k, L, int(rec["n"]), fit, peaks)


def write_decompositions(decompositions, out_dir) -> Path:
    """One ``<word>.json`` record per word plus a ``decompositions.csv`` summary."""
    out = _mkdir(out_dir)
    summary = []
    for d in decompositions:
        rec = decomposition_record(d)
        with open(out / f"{d.word}.json", "w") as fh:
            json.dump(rec, fh, indent=1)
            fh.write("\n")
        summary.append([rec[c] for c in _SUMMARY] + [len(rec["peaks"])])
    with open(out / "decompositions.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_SUMMARY + ["n_flagged"])
        w.writerows(summary)
    return out


_SUMMARY = ["word", "n", "alpha", "theta", "lambda", "m_b", "m_pk", "lts_objective"]


def read_decompositions(decomp_dir) -> list[Decomposition]:
    d = Path(decomp_dir)
    summary = d / "decompositions.csv"
    if not summary.is_file():
        raise DataError(f"no decompositions.csv in {d}")
    with open(summary, newline="") as fh:
        words = [row["word"] for row in csv.DictReader(fh)]
    out = []
    for word in words:
        try:
            with open(d / f"{word}.json") as fh:
                out.append(decomposition_from_record(json.load(fh)))
        except (OSError, ValueError, KeyError) as exc:
            raise DataError(f"bad decomposition record for {word}: {exc}") from exc
    if not out:
        raise DataError(f"{summary} lists no words")
    return out


# ---------------------------------------------------------------------------
# scores


def write_features(words, baseline, peak, out_dir) -> Path:
    """``scores.csv`` (word, b1.., p1..) plus loadings/means of both PCAs."""
    out = _mkdir(out_dir)
    cols = [f"b{i + 1}" for i in range(baseline.q)] + [f"p{i + 1}" for i in range(peak.q)]
    scores = np.hstack([baseline.scores, peak.scores])
    with open(out / "scores.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["word"] + cols)
        for word, row in zip(words, scores):
            w.writerow([word] + [repr(float(v)) for v in row])
    for name, sm in (("baseline", baseline), ("peak", peak)):
        np.savetxt(out / f"{name}_pca.csv", np.vstack([sm.column_means, sm.components]),
                   delimiter=",", header="first row: column means; following rows: loadings")
    with open(out / "explained_variance.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["block", "component", "ratio", "retained"])
        for name, sm in (("baseline", baseline), ("peak", peak)):
            for i, r in enumerate(sm.variance_ratio[: max(sm.q, 10)]):
                w.writerow([name, i + 1, repr(float(r)), int(i < sm.q)])
    return out


def read_scores(path):
    """Return ``(words, column_names, matrix)`` from a ``scores.csv`` file."""
    path = Path(path)
    if path.is_dir():
        path = path / "scores.csv"
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = list(reader)
    except (OSError, StopIteration) as exc:
        raise DataError(f"cannot read scores from {path}: {exc}") from exc
    words = [r[0] for r in rows]
    try:
        X = np.array([[float(v) for v in r[1:]] for r in rows], dtype=float).reshape(len(rows), len(header) - 1)
    except ValueError as exc:
        raise DataError(f"malformed scores in {path}: {exc}") from exc
    return words, header[1:], X


def method_columns(columns, X, method: int, block_weight: float = 1.0) -> np.ndarray:
    """Select the feature block used by clustering method 1, 2 or 3."""
    b = [i for i, c in enumerate(columns) if c.startswith("b")]
    p = [i for i, c in enumerate(columns) if c.startswith("p")]
    from .features import assemble_features

    return assemble_features(X[:, b], X[:, p], method, block_weight)


# ---------------------------------------------------------------------------
# partitions and index tables


def write_partition(words, labels, path) -> Path:
    path = Path(path)
    _mkdir(path.parent)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["word", "label"])
        w.writerows(zip(words, (int(v) for v in labels)))
    return path


def read_partition(path) -> dict:
    try:
        with open(path, newline="") as fh:
            return {row["word"]: row["label"] for row in csv.DictReader(fh)}
    except (OSError, KeyError) as exc:
        raise DataError(f"cannot read partition {path}: {exc}") from exc


def write_validity(reports, path) -> Path:
    path = Path(path)
    _mkdir(path.parent)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["nc", "ch", "silhouette", "c_index"])
        for r in reports:
            w.writerow([r.nc, repr(float(r.ch)), repr(float(r.silhouette)), repr(float(r.c_index))])
    return path
