"""Command-line front end: ``plapfraud run | undersample | selftest``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 some p did not
converge (reports are still written), 4 self-test failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .pipeline import (DEFAULT_P_VALUES, DataError, ExperimentConfig, PipelineError,
                       load_csv, run_experiment, save_csv)
from .sampling import cluster_centroids_undersample

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NOT_CONVERGED = 3
EXIT_SELFTEST = 4

DEFAULTS = ExperimentConfig()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_data_args(sp, output_help):
    sp.add_argument("--data", required=True, type=Path, help="input CSV (Time,V1..V28,Amount,Class)")
    sp.add_argument("--output", type=Path, help=output_help)
    sp.add_argument("--ratio", type=float, default=DEFAULTS.ratio,
                    help="fraud/normal ratio after under-sampling (default %(default)s)")
    sp.add_argument("--seed-sample", type=int, default=DEFAULTS.seed_sample,
                    help="k-means seed (default %(default)s)")
    sp.add_argument("--kmeans-max-iter", type=int, default=DEFAULTS.kmeans_max_iter)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="plapfraud", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="full experiment, one accuracy per p")
    _add_data_args(run, "directory for report.json and table.txt (default: results)")
    run.add_argument("--p", type=float, nargs="+", default=list(DEFAULT_P_VALUES),
                     metavar="P", help="p values to sweep (default 1.0 .. 2.0 step 0.1)")
    run.add_argument("--k", type=int, default=DEFAULTS.k, help="neighbours per vertex")
    run.add_argument("--t", type=float, default=DEFAULTS.t, help="Gaussian kernel bandwidth")
    run.add_argument("--mu", type=float, default=DEFAULTS.mu)
    run.add_argument("--epsilon", type=float, default=DEFAULTS.epsilon)
    run.add_argument("--tol", type=float, default=DEFAULTS.tol)
    run.add_argument("--max-iter", type=int, default=DEFAULTS.max_iter)
    run.add_argument("--train-count", type=int, default=DEFAULTS.train_count)
    run.add_argument("--seed-split", type=int, default=DEFAULTS.seed_split)
    run.add_argument("--no-standardize", dest="standardize", action="store_false",
                     help="build the graph on raw features")

    us = sub.add_parser("undersample", help="write the Cluster-Centroids reduced dataset")
    _add_data_args(us, "output CSV path (default: <data>.reduced.csv)")

    st = sub.add_parser("selftest", help="randomised operator and solver property checks")
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--graphs", type=int, default=20, help="number of random graphs")
    st.add_argument("--inject-asymmetry", action="store_true", help=argparse.SUPPRESS)
    return parser


def cmd_run(args) -> int:
    try:
        cfg = ExperimentConfig(
            ratio=args.ratio, train_count=args.train_count, k=args.k, t=args.t,
            standardize=args.standardize, mu=args.mu, epsilon=args.epsilon, tol=args.tol,
            max_iter=args.max_iter, p_values=tuple(args.p), seed_sample=args.seed_sample,
            seed_split=args.seed_split, kmeans_max_iter=args.kmeans_max_iter)
        cfg.graph_config()
        for p in cfg.p_values:
            cfg.solver_config(p)
    except ValueError as exc:
        print(f"plapfraud run: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        report = run_experiment(args.data, cfg)
    except PipelineError as exc:
        print(f"plapfraud run: {exc}", file=sys.stderr)
        return EXIT_DATA
    outdir = args.output or Path("results")
    js, txt = report.write(outdir)
    sys.stdout.write(report.format_table())
    print(f"wrote {js} and {txt}")
    if not report.all_converged:
        bad = [f"{p:g}" for p, s in report.solves.items() if not s["converged"]]
        print(f"warning: no convergence for p = {', '.join(bad)}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_undersample(args) -> int:
    try:
        ds = load_csv(args.data)
        reduced = cluster_centroids_undersample(ds, args.ratio, args.seed_sample,
                                                args.kmeans_max_iter)
    except (DataError, ValueError) as exc:
        print(f"plapfraud undersample: {exc}", file=sys.stderr)
        return EXIT_DATA
    out = args.output or args.data.with_suffix(".reduced.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_csv(reduced, out)
    print(f"{ds.n} rows -> {reduced.n} rows "
          f"({reduced.fraud_count} fraud, {reduced.normal_count} centroids); wrote {out}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .checks import run_selftest

    results = run_selftest(seed=args.seed, n_graphs=args.graphs,
                           inject_asymmetry=args.inject_asymmetry)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<26} worst={r.worst:.3e} limit={r.limit:.1e}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} properties passed")
    return EXIT_OK if failed == 0 else EXIT_SELFTEST


COMMANDS = {"run": cmd_run, "undersample": cmd_undersample, "selftest": cmd_selftest}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
