"""Command-line entry point: ``lagdist <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import __version__
from .cluster import DEFAULT_RESTARTS, sweep_nc
from .decompose import DEFAULT_QUANTILE, DEFAULT_TRIM, decompose_all, default_lstar
from .errors import DataError, LagdistError, NumericalError
from .evaluate import adjusted_rand, bootstrap_stability
from .features import DEFAULT_EXPLAINED_VARIANCE, decomposition_features
from .genomescan import count_lags_file, default_max_lag, read_histograms, write_histograms
from .io import (method_columns, read_decompositions, read_partition, read_scores, write_decompositions,
                 write_features, write_partition, write_validity)
from .pipeline import PipelineConfig, StageError, emit_plot_tables, run_pipeline, write_stability
from .simgen import SimCase, StudySettings, all_cases, run_study, write_study_table

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _nc_range(text: str) -> tuple[int, int]:
    try:
        a, b = (int(v) for v in text.split(".."))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a..b, got {text!r}") from None
    if not 2 <= a <= b:
        raise argparse.ArgumentTypeError("nc range needs 2 <= a <= b")
    return a, b


def _methods(text: str) -> tuple[int, ...]:
    try:
        ms = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad method list {text!r}") from None
    if not ms or any(m not in (1, 2, 3) for m in ms):
        raise argparse.ArgumentTypeError("methods must be drawn from 1,2,3")
    return ms


def _case(text: str) -> SimCase:
    try:
        return SimCase.parse(text)
    except (ValueError, LagdistError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _lstar_for(k, lstar, max_lag):
    if lstar is not None:
        return lstar
    return default_lstar(k) if k in (3, 5) else max_lag


# ---------------------------------------------------------------------------
# subcommands


def cmd_count(args):
    max_lag = args.max_lag if args.max_lag is not None else default_max_lag(args.k)
    if not Path(args.input).is_file():
        raise DataError(f"input file {args.input} does not exist")
    hists = count_lags_file(args.input, args.k, max_lag, args.format)
    write_histograms(hists, args.out)
    print(f"wrote {len(hists)} histograms (k={args.k}, L={max_lag}) to {args.out}")


def cmd_decompose(args):
    hists = read_histograms(args.hist_dir)
    k, L = hists[0].k, hists[0].max_lag
    lstar = _lstar_for(k, args.lstar, L)
    decs = decompose_all(hists, lstar, args.trim, args.quantile, args.restarts, args.seed)
    write_decompositions(decs, args.out)
    print(f"decomposed {len(decs)} words (L*={lstar}) into {args.out}")


def cmd_features(args):
    decs = read_decompositions(args.decomp_dir)
    base, peak = decomposition_features(decs, args.explained_variance)
    write_features([d.word for d in decs], base, peak, args.out)
    print(f"q_b={base.q} q_pk={peak.q}; scores in {Path(args.out) / 'scores.csv'}")


def cmd_cluster(args):
    words, cols, S = read_scores(args.features)
    X = method_columns(cols, S, args.method, args.block_weight)
    out = Path(args.out)
    if args.nc_range is not None:
        reports = sweep_nc(X, range(args.nc_range[0], args.nc_range[1] + 1), args.restarts, args.seed)
        for r in reports:
            write_partition(words, r.partition.labels, out / f"partition_nc{r.nc}.csv")
    else:
        reports = sweep_nc(X, [args.nc], args.restarts, args.seed)
        write_partition(words, reports[0].partition.labels, out / "partition.csv")
    write_validity(reports, out / "validity.csv")
    for r in reports:
        print(f"nc={r.nc} ch={r.ch:.6g} silhouette={r.silhouette:.6g} c_index={r.c_index:.6g}")


def cmd_ari(args):
    truth = read_partition(args.truth)
    pred = read_partition(args.pred)
    if set(truth) != set(pred):
        raise DataError("truth and prediction cover different words")
    words = sorted(truth)
    print(f"{adjusted_rand([truth[w] for w in words], [pred[w] for w in words]):.10g}")


def cmd_stability(args):
    words, cols, S = read_scores(args.features)
    X = method_columns(cols, S, args.method, args.block_weight)
    rep = bootstrap_stability(X, args.nc, args.bootstrap, args.restarts, args.seed)
    for c, (size, j) in enumerate(zip(rep.reference.sizes, rep.jaccard)):
        print(f"cluster {c}: size={size} jaccard={j:.4f}")
    if args.out:
        write_stability(rep, args.out)


def cmd_simulate(args):
    if args.all_cases == (args.case is not None):
        raise UsageError("give exactly one of --case or --all-cases")
    cases = all_cases() if args.all_cases else [args.case]
    settings = StudySettings(lstar=args.lstar, lts_restarts=args.lts_restarts,
                             kmeans_restarts=args.kmeans_restarts)

    def progress(case, r, rep):
        if args.verbose:
            print(f"case {case.factors} replica {r}: {rep.ari} {rep.error or ''}", file=sys.stderr)

    results = run_study(cases, args.replicas, args.methods, args.seed, settings, progress)
    out = Path(args.out)
    write_study_table(results, out if out.suffix == ".csv" else out / "study.csv")
    for res in results:
        means = " ".join(f"M{m}={res.mean_ari(m):.3f}" for m in res.methods)
        print(f"{res.case.factors}: {means} q_b={res.q_b:.2f} q_pk={res.q_pk:.2f}")


def cmd_pipeline(args):
    cfg = PipelineConfig(
        input=args.input, out=args.out, k=args.k, max_lag=args.max_lag, lstar=args.lstar,
        trim=args.trim, quantile=args.quantile, explained_variance=args.explained_variance,
        method=args.method, nc=args.nc, nc_range=args.nc_range, lts_restarts=args.restarts,
        kmeans_restarts=args.kmeans_restarts, bootstrap=args.bootstrap, seed=args.seed,
        fmt=args.format, block_weight=args.block_weight,
    )
    manifest = run_pipeline(cfg)
    s = manifest["summary"]
    print(f"{s['words']} words, q_b={s['q_b']}, q_pk={s['q_pk']}, cluster sizes {s['cluster_sizes']}")
    if args.plot_data:
        emit_plot_tables(args.out)


def cmd_plot_data(args):
    out = emit_plot_tables(args.run_dir, args.out)
    print(f"plot tables in {out}")


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lagdist", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"lagdist {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def seed(sp):
        sp.add_argument("--seed", type=int, default=0)

    c = sub.add_parser("count", help="lag histograms of all 4^k words")
    c.add_argument("--input", required=True)
    c.add_argument("-k", type=int, required=True)
    c.add_argument("--max-lag", type=int)
    c.add_argument("--format", choices=["auto", "fasta", "plain"], default="auto")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_count)

    d = sub.add_parser("decompose", help="baseline fit and peak extraction")
    d.add_argument("--hist-dir", required=True)
    d.add_argument("--lstar", type=int)
    d.add_argument("--trim", type=float, default=DEFAULT_TRIM)
    d.add_argument("--quantile", type=float, default=DEFAULT_QUANTILE)
    d.add_argument("--restarts", type=int, default=10)
    seed(d)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_decompose)

    f = sub.add_parser("features", help="PCA scores of baseline and peak CDFs")
    f.add_argument("--decomp-dir", required=True)
    f.add_argument("--explained-variance", type=float, default=DEFAULT_EXPLAINED_VARIANCE)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_features)

    def feature_args(sp):
        sp.add_argument("--features", required=True, help="scores.csv or the directory holding it")
        sp.add_argument("--method", type=int, choices=[1, 2, 3], default=3)
        sp.add_argument("--block-weight", type=float, default=1.0)
        sp.add_argument("--restarts", type=int, default=DEFAULT_RESTARTS)
        seed(sp)

    k = sub.add_parser("cluster", help="k-means with validity indices")
    feature_args(k)
    g = k.add_mutually_exclusive_group(required=True)
    g.add_argument("--nc", type=int)
    g.add_argument("--nc-range", type=_nc_range)
    k.add_argument("--out", required=True)
    k.set_defaults(func=cmd_cluster)

    a = sub.add_parser("ari", help="adjusted Rand index of two partition CSVs")
    a.add_argument("--truth", required=True)
    a.add_argument("--pred", required=True)
    a.set_defaults(func=cmd_ari)

    s = sub.add_parser("stability", help="bootstrap Jaccard stability of each cluster")
    feature_args(s)
    s.add_argument("--nc", type=int, required=True)
    s.add_argument("--bootstrap", type=int, default=200)
    s.add_argument("--out")
    s.set_defaults(func=cmd_stability)

    m = sub.add_parser("simulate", help="simulation study over the factorial design")
    m.add_argument("--case", type=_case, help="T,NP,PL,PM,SS")
    m.add_argument("--all-cases", action="store_true")
    m.add_argument("--replicas", type=int, default=100)
    m.add_argument("--methods", type=_methods, default=(1, 2, 3))
    m.add_argument("--lstar", type=int)
    m.add_argument("--lts-restarts", type=int, default=StudySettings.lts_restarts)
    m.add_argument("--kmeans-restarts", type=int, default=DEFAULT_RESTARTS)
    m.add_argument("-v", "--verbose", action="store_true")
    seed(m)
    m.add_argument("--out", required=True, help="directory (study.csv is written there) or a .csv path")
    m.set_defaults(func=cmd_simulate)

    r = sub.add_parser("pipeline", help="count, decompose, features, cluster and stability in one run")
    r.add_argument("--input", required=True)
    r.add_argument("-k", type=int, default=3)
    r.add_argument("--max-lag", type=int)
    r.add_argument("--format", choices=["auto", "fasta", "plain"], default="auto")
    r.add_argument("--lstar", type=int)
    r.add_argument("--trim", type=float, default=DEFAULT_TRIM)
    r.add_argument("--quantile", type=float, default=DEFAULT_QUANTILE)
    r.add_argument("--restarts", type=int, default=10)
    r.add_argument("--explained-variance", type=float, default=DEFAULT_EXPLAINED_VARIANCE)
    r.add_argument("--method", type=int, choices=[1, 2, 3], default=3)
    r.add_argument("--block-weight", type=float, default=1.0)
    r.add_argument("--nc", type=int, default=2)
    r.add_argument("--nc-range", type=_nc_range)
    r.add_argument("--kmeans-restarts", type=int, default=DEFAULT_RESTARTS)
    r.add_argument("--bootstrap", type=int, default=0)
    r.add_argument("--plot-data", action="store_true", help="also write plot tables under <out>/plot")
    seed(r)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_pipeline)

    pd = sub.add_parser("plot-data", help="plot-ready tables from a pipeline run")
    pd.add_argument("--run-dir", required=True)
    pd.add_argument("--out")
    pd.set_defaults(func=cmd_plot_data)
    return p


def _exit_code(exc) -> int:
    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(exc, (DataError, OSError, csv.Error)):
        return EXIT_DATA
    return EXIT_USAGE


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"lagdist: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LagdistError, OSError, csv.Error, ValueError) as exc:
        print(f"lagdist {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _exit_code(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
