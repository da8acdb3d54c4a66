"""Command-line front end.

Exit codes: 0 success, 2 input error, 3 sampler stall.
"""

import argparse
import csv
import logging
import os
import sys
import warnings

from . import config as config_mod
from . import runfile
from .diagnostics import (
    InsertionSequence,
    TieAmbiguityWarning,
    ks_test_continuous,
    ks_test_uniform,
    reconstruct_indexes,
    rolling_p,
    two_sample_ks,
)
from .ns_engine import run
from .errors import ContractError, MalformedRunError, NSAuditError, SamplerStall
from .evidence import log_evidence
from .harness import histogram, perfect_p_values, report_row, run_repetitions, write_report

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_STALL = 3

logger = logging.getLogger("nsaudit")


def _fmt(x):
    return "%.6g" % x


def _error(message):
    print(f"nsaudit: error: {message}", file=sys.stderr)


def _load_configs(path):
    try:
        return config_mod.load(path)
    except OSError as exc:
        raise ContractError(f"cannot read config {path}: {exc.strerror}") from None


def _audit_lines(seq):
    ks = ks_test_uniform(seq)
    roll = rolling_p(seq)
    return ks, roll, [
        f"n_iter={len(seq)}",
        f"n_live={seq.n_live}",
        f"D_n={_fmt(ks.statistic_d)}",
        f"p={_fmt(ks.p_value)}",
        f"rolling_p={_fmt(roll.adjusted_p)}",
        f"n_chunks={roll.n_chunks}",
        "chunk_p=" + ",".join(_fmt(p) for p in roll.per_chunk_p),
    ]


def cmd_run(args):
    try:
        configs = _load_configs(args.config)
    except ContractError as exc:
        _error(exc)
        return EXIT_INPUT
    if len(configs) != 1:
        _error(f"{args.config} describes {len(configs)} runs; use 'batch' for grids")
        return EXIT_INPUT
    cfg = configs[0]
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    try:
        trace = run(cfg.problem, cfg.settings)
    except SamplerStall as exc:
        partial = runfile.from_trace(exc.trace, cfg.header())
        runfile.write(args.out, partial)
        _error(f"sampler stalled at iteration {exc.iteration}: {exc}; "
               f"partial run written to {args.out}")
        return EXIT_STALL
    except ContractError as exc:
        _error(exc)
        return EXIT_INPUT
    runfile.write(args.out, runfile.from_trace(trace, cfg.header()))
    estimate = log_evidence(trace)
    seq = InsertionSequence(trace.insertion_indexes, trace.settings.n_live)
    ks, roll, _ = _audit_lines(seq)
    print(f"logZ={_fmt(estimate.log_z)} +/- {_fmt(estimate.dlog_z)} "
          f"p={_fmt(ks.p_value)} rolling_p={_fmt(roll.adjusted_p)} "
          f"n_iter={trace.n_iter} terminated_by={trace.terminated_by}")
    return EXIT_OK


def cmd_check(args):
    try:
        rf = runfile.read(args.runfile)
        n_live = args.n_live if args.n_live is not None else rf.n_live
        indexes = rf.stored_indexes()
        if indexes is not None:
            seq = InsertionSequence(indexes, n_live)
            source = "stored"
        else:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", TieAmbiguityWarning)
                seq = reconstruct_indexes(rf.death, rf.birth, n_live)
            for w in caught:
                print(f"nsaudit: warning: {w.message}", file=sys.stderr)
            source = "reconstructed"
        if len(seq) == 0:
            raise MalformedRunError("run has no replacement points to test")
    except OSError as exc:
        _error(f"cannot read {args.runfile}: {exc.strerror}")
        return EXIT_INPUT
    except (MalformedRunError, ContractError) as exc:
        _error(exc)
        return EXIT_INPUT
    logger.info("insertion indexes %s", source)
    _, _, lines = _audit_lines(seq)
    print("\n".join(lines))
    return EXIT_OK


def cmd_batch(args):
    if args.reps < 2:
        _error("--reps must be at least 2")
        return EXIT_INPUT
    try:
        configs = _load_configs(args.config)
    except ContractError as exc:
        _error(exc)
        return EXIT_INPUT
    rows = []
    for cfg in configs:
        outcomes = run_repetitions(cfg, args.reps, args.jobs)
        row = report_row(cfg, outcomes)
        rows.append(row)
        logger.info("%s d=%s %s: %d ok, %d failed", row["problem"], row["d"],
                    row["sampler"], row["n_runs"], row["n_failed"])
    if args.out == "-":
        write_report(sys.stdout, rows)
    else:
        write_report(args.out, rows)
        for row in rows:
            print(f"{row['problem']} d={row['d']} {row['sampler']} "
                  f"efr_or_nr={_fmt(row['efr_or_nr'])} logZ={_fmt(row['mean_log_z'])} "
                  f"bias={_fmt(row['bias'])} median_p={_fmt(row['median_p'])} "
                  f"flags={row['flags'] or '-'}")
    return EXIT_OK


def _hist_path(out):
    root, ext = os.path.splitext(out)
    return f"{root}_hist{ext or '.csv'}"


def cmd_simulate_perfect(args):
    if min(args.n_live, args.n_iter, args.runs) < 1 or args.n_live < 2:
        _error("--n-live must be at least 2; --n-iter and --runs must be positive")
        return EXIT_INPUT
    pv = perfect_p_values(args.n_live, args.n_iter, args.runs, args.seed, args.jobs)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["run", "perfect_p", "discrete_p", "continuous_p"])
        for k in range(args.runs):
            writer.writerow([k, _fmt(pv["perfect"][k]), _fmt(pv["discrete"][k]),
                             _fmt(pv["continuous"][k])])
    hist_out = args.hist or _hist_path(args.out)
    hists = {name: histogram(values, args.bins) for name, values in pv.items()}
    with open(hist_out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin_left", "perfect", "discrete", "continuous"])
        for i, (left, _) in enumerate(hists["perfect"]):
            writer.writerow([_fmt(left)] + [hists[n][i][1] for n in ("perfect", "discrete",
                                                                     "continuous")])
    if args.runs > 1:
        vs_discrete = two_sample_ks(pv["perfect"], pv["discrete"])
        flat = ks_test_continuous(pv["continuous"])
        print(f"perfect_vs_discrete: D={_fmt(vs_discrete.statistic_d)} "
              f"p={_fmt(vs_discrete.p_value)}")
        print(f"continuous_uniformity: D={_fmt(flat.statistic_d)} p={_fmt(flat.p_value)}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nsaudit",
        description="Nested sampling with insertion-index cross-checks.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run nested sampling and write a run file")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None, help="override ns.seed")
    p.add_argument("--out", required=True, help="run file to write")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check", help="audit the insertion indexes of a run file")
    p.add_argument("runfile")
    p.add_argument("--n-live", type=int, default=None,
                   help="number of live points, if the header lacks n_live")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("batch", help="repeat runs and write a summary table")
    p.add_argument("config")
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--out", required=True, help="report CSV, or - for stdout")
    p.add_argument("--jobs", type=int, default=None,
                   help="worker processes (default: CPU count; NSAUDIT_JOBS overrides)")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("simulate-perfect", help="p-values of simulated perfect runs")
    p.add_argument("--n-live", type=int, default=1000)
    p.add_argument("--n-iter", type=int, default=10000)
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--out", required=True, help="p-value CSV")
    p.add_argument("--hist", default=None, help="histogram CSV (default: <out>_hist.csv)")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_simulate_perfect)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except NSAuditError as exc:
        _error(exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
