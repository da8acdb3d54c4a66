"""Evidence estimates from nested-sampling traces and cross-run summaries.

Volumes follow the mean compression, ``X_i = exp(-i / n_live)`` for dead
point ``i = 1..N`` with ``X_0 = 1``.  Dead point ``i`` gets the trapezium
weight ``(X_{i-1} - X_{i+1}) / 2``; the first point also takes the sliver
``(X_0 - X_1) / 2`` and the last closes at ``X_N``, so the dead weights sum
to ``1 - X_N``.  The remaining volume ``X_N`` is shared equally by the final
live points.

Volumes are treated deterministically.  A fuller treatment would use the
compression density ``P(X_j | X_{j-1}) = n X_j^(n-1) / X_{j-1}^n`` on
``0 < X_j < X_{j-1}`` to sample volumes; that is not done here.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import logsumexp as _scipy_logsumexp

from .errors import ContractError, UndefinedEvidenceError


@dataclass(frozen=True)
class EvidenceEstimate:
    log_z: float
    dlog_z: float
    information_h: float


@dataclass(frozen=True)
class RunSummary:
    mean_log_z: float
    mean_dlog_z: float
    sigma_log_z: float
    sem_log_z: float
    inaccuracy: float
    bias: float
    median_p: float
    median_rolling_p: float
    n_runs: int


def logsumexp(values):
    """``log(sum(exp(values)))``, returning ``-inf`` for an all ``-inf`` input."""
    values = np.asarray(values, dtype=float)
    if values.size == 0 or not np.any(values > -np.inf):
        return -math.inf
    return float(_scipy_logsumexp(values))


def log_weights(n_iter, n_live):
    """Log trapezium weights of the dead points and of each final live point."""
    if n_iter < 1:
        raise ContractError("need at least one dead point")
    n = float(n_live)
    i = np.arange(1, n_iter + 1, dtype=float)
    if n_iter == 1:
        log_w = np.array([math.log(-math.expm1(-1.0 / n))])
    else:
        log_half_gap = math.log(0.5 * -math.expm1(-2.0 / n))
        log_w = -(i - 1.0) / n + log_half_gap
        # first: X_0 - (X_1 + X_2) / 2
        log_w[0] = math.log(1.0 - 0.5 * (math.exp(-1.0 / n) + math.exp(-2.0 / n)))
        # last: (X_{N-1} - X_N) / 2
        log_w[-1] = -(n_iter - 1) / n + math.log(0.5 * -math.expm1(-1.0 / n))
    log_live = -n_iter / n - math.log(n)
    return log_w, log_live


def log_evidence_from_contours(death_log_likes, final_log_likes, n_live):
    """Evidence estimate from dead-point and final live-point log-likelihoods."""
    death = np.asarray(death_log_likes, dtype=float)
    final = np.asarray(final_log_likes, dtype=float)
    if death.size == 0:
        raise ContractError("trace has no dead points")
    log_w, log_live = log_weights(death.size, n_live)
    log_l = np.concatenate([death, final])
    terms = np.concatenate([death + log_w, final + log_live])
    log_z = logsumexp(terms)
    if log_z == -math.inf:
        raise UndefinedEvidenceError("every recorded likelihood is zero")
    finite = terms > -np.inf
    p = np.exp(terms[finite] - log_z)
    h = float(np.sum(p * (log_l[finite] - log_z)))
    h = max(h, 0.0)
    return EvidenceEstimate(log_z, math.sqrt(h / n_live), h)


def log_evidence(trace):
    """Trapezium-rule evidence of a trace, including the final live points."""
    return log_evidence_from_contours(
        trace.death_log_likes,
        [p.log_like for p in trace.final_live_points],
        trace.settings.n_live,
    )


def log_bayes_factor(log_z1, log_z0):
    """``log(Z1 / Z0)``."""
    return float(log_z1) - float(log_z0)


def _ratio(num, den):
    if num == 0.0:
        return 0.0
    if den == 0.0:
        return math.copysign(math.inf, num)
    return num / den


def summarize_runs(estimates, p_values, rolling_p_values, analytic):
    """Means, scatter and normalised errors over repeated runs.

    ``inaccuracy`` divides the error of the mean log Z by the mean single-run
    uncertainty; ``bias`` divides it by the standard error of the mean.
    """
    n = len(estimates)
    if n < 2:
        raise ContractError("summarize_runs needs at least two runs")
    if len(p_values) == 0 or len(rolling_p_values) == 0:
        raise ContractError("p-value lists must be non-empty")
    log_z = np.array([e.log_z for e in estimates], dtype=float)
    dlog_z = np.array([e.dlog_z for e in estimates], dtype=float)
    mean = float(log_z.mean())
    mean_d = float(dlog_z.mean())
    sigma = float(log_z.std(ddof=1))
    sem = sigma / math.sqrt(n)
    error = mean - float(analytic)
    return RunSummary(
        mean_log_z=mean,
        mean_dlog_z=mean_d,
        sigma_log_z=sigma,
        sem_log_z=sem,
        inaccuracy=_ratio(error, mean_d),
        bias=_ratio(error, sem),
        median_p=float(np.median(p_values)),
        median_rolling_p=float(np.median(rolling_p_values)),
        n_runs=n,
    )
