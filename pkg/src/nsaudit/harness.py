"""Seeded repetitions: batch evidence tables and perfect-NS p-value studies.

Repetition ``k`` of a job always uses seed ``seed + k``, and results are
collected in repetition order, so output does not depend on the number of
worker processes.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import csv
import math
import os

import numpy as np

from .diagnostics import (
    InsertionSequence,
    ks_test_continuous,
    ks_test_uniform,
    rolling_p,
    simulate_perfect_ns,
)
from .ns_engine import run
from .errors import NSAuditError
from .evidence import EvidenceEstimate, log_evidence, summarize_runs
from .toy_likelihoods import reference_log_evidence

REPORT_VERSION = "1"
REPORT_COLUMNS = (
    "problem", "sampler", "efr_or_nr", "d", "analytic_log_z", "mean_log_z",
    "mean_dlog_z", "sigma_log_z", "sem_log_z", "inaccuracy", "bias", "median_p",
    "median_rolling_p", "n_runs", "n_failed", "flags", "errors",
)
FLAG_SIGMA = 3.0
FLAG_P = 0.01


@dataclass(frozen=True)
class RunOutcome:
    seed: int
    log_z: float = math.nan
    dlog_z: float = math.nan
    information_h: float = math.nan
    p_value: float = math.nan
    rolling_p: float = math.nan
    n_iter: int = 0
    terminated_by: str = ""
    error: str = ""


def resolve_jobs(jobs=None):
    """Worker count: ``NSAUDIT_JOBS`` beats the flag, which beats the CPU count."""
    env = os.environ.get("NSAUDIT_JOBS")
    if env:
        return max(1, int(env))
    if jobs:
        return max(1, int(jobs))
    return os.cpu_count() or 1


def _pmap(func, items, jobs):
    jobs = resolve_jobs(jobs)
    if jobs == 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def run_one(run_config):
    """Run once and audit the trace; failures are captured, not raised."""
    seed = run_config.settings.rng_seed
    try:
        trace = run(run_config.problem, run_config.settings)
        estimate = log_evidence(trace)
        seq = InsertionSequence(trace.insertion_indexes, trace.settings.n_live)
        return RunOutcome(seed, estimate.log_z, estimate.dlog_z, estimate.information_h,
                          ks_test_uniform(seq).p_value, rolling_p(seq).adjusted_p,
                          trace.n_iter, trace.terminated_by)
    except NSAuditError as exc:
        return RunOutcome(seed, error=f"{type(exc).__name__}: {exc}")


def run_repetitions(run_config, reps, jobs=None):
    base = run_config.settings.rng_seed
    return _pmap(run_one, [run_config.with_seed(base + k) for k in range(reps)], jobs)


def flags_for(summary):
    flags = []
    if abs(summary.bias) > FLAG_SIGMA:
        flags.append("bias")
    if abs(summary.inaccuracy) > FLAG_SIGMA:
        flags.append("inaccuracy")
    if summary.median_p < FLAG_P:
        flags.append("p")
    if summary.median_rolling_p < FLAG_P:
        flags.append("rolling_p")
    return flags


def report_row(run_config, outcomes):
    """One table row summarising the repetitions of a configuration."""
    problem, sampler = run_config.problem, run_config.settings.sampler
    ok = [o for o in outcomes if not o.error]
    failed = [o for o in outcomes if o.error]
    row = dict.fromkeys(REPORT_COLUMNS, math.nan)
    row.update(problem=problem.kind, sampler=sampler.kind, efr_or_nr=run_config.efr_or_nr(),
               d=problem.dimension, analytic_log_z=reference_log_evidence(problem),
               n_runs=len(ok), n_failed=len(failed), flags="",
               errors="; ".join(f"seed {o.seed}: {o.error}" for o in failed))
    if len(ok) >= 2:
        summary = summarize_runs(
            [EvidenceEstimate(o.log_z, o.dlog_z, o.information_h) for o in ok],
            [o.p_value for o in ok], [o.rolling_p for o in ok], row["analytic_log_z"])
        row.update(mean_log_z=summary.mean_log_z, mean_dlog_z=summary.mean_dlog_z,
                   sigma_log_z=summary.sigma_log_z, sem_log_z=summary.sem_log_z,
                   inaccuracy=summary.inaccuracy, bias=summary.bias,
                   median_p=summary.median_p, median_rolling_p=summary.median_rolling_p,
                   flags=" ".join(flags_for(summary)))
    return row


def _cell(value):
    if isinstance(value, float):
        return "%.6g" % value
    return str(value)


def write_report(path_or_file, rows):
    """CSV with a ``# version=`` comment line and fixed column order."""
    def _write(fh):
        fh.write(f"# version={REPORT_VERSION}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            writer.writerow([_cell(row[c]) for c in REPORT_COLUMNS])

    if hasattr(path_or_file, "write"):
        _write(path_or_file)
    else:
        with open(path_or_file, "w", encoding="utf-8", newline="") as fh:
            _write(fh)


def _perfect_task(args):
    n_live, n_iter, seed = args
    base = np.random.PCG64(int(seed) & 0xFFFF_FFFF_FFFF_FFFF)
    perfect = simulate_perfect_ns(n_live, n_iter, np.random.Generator(base.jumped(1)))
    discrete = np.random.Generator(base.jumped(2)).integers(0, n_live, n_iter)
    continuous = np.random.Generator(base.jumped(3)).random(n_iter)
    return (ks_test_uniform(perfect).p_value,
            ks_test_uniform(InsertionSequence(discrete, n_live)).p_value,
            ks_test_continuous(continuous).p_value)


def perfect_p_values(n_live, n_iter, runs, seed=0, jobs=None):
    """KS p-values of perfect-NS runs and of two reference samplers.

    Returns a dict of arrays keyed ``perfect``, ``discrete`` (i.i.d. discrete
    uniform indexes) and ``continuous`` (i.i.d. U(0, 1) samples).
    """
    results = _pmap(_perfect_task, [(n_live, n_iter, seed + k) for k in range(runs)], jobs)
    arr = np.array(results, dtype=float).reshape(runs, 3)
    return {"perfect": arr[:, 0], "discrete": arr[:, 1], "continuous": arr[:, 2]}


def histogram(values, bins=20):
    """``(bin_left, count)`` pairs over [0, 1]."""
    counts, edges = np.histogram(values, bins=bins, range=(0.0, 1.0))
    return list(zip(edges[:-1].tolist(), counts.tolist()))
