"""Nested sampling with insertion-index cross-checks.

A small nested-sampling engine on toy likelihoods, three constrained-prior
samplers, evidence accumulation, and a Kolmogorov-Smirnov audit of the order
in which replacement points are inserted into the live set.
"""

from .constrained_samplers import LivePoint, SamplerConfig, fit_ellipsoid
from .diagnostics import (
    InsertionSequence,
    KSResult,
    RollingResult,
    TieAmbiguityWarning,
    insertion_index,
    kolmogorov_p,
    ks_statistic,
    ks_test_uniform,
    reconstruct_indexes,
    rolling_p,
    simulate_perfect_ns,
    two_sample_ks,
)
from .errors import (
    ContractError,
    MalformedRunError,
    NSAuditError,
    SamplerStall,
    UndefinedEvidenceError,
    UnsupportedProblemError,
)
from .evidence import EvidenceEstimate, RunSummary, log_bayes_factor, log_evidence, summarize_runs
from .ns_engine import NSSettings, NSTrace, initialize, run, step
from .toy_likelihoods import (
    ToyProblem,
    analytic_log_evidence,
    log_likelihood,
    make_problem,
    prior_transform,
)

__version__ = "0.1.0"
