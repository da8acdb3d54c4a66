"""Strategies for drawing from the prior restricted to ``L > L*``.

All proposers work in unit-hypercube coordinates and return a
:class:`LivePoint` whose ``birth_log_like`` is the contour ``L*`` it was
drawn above.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ContractError, SamplerStall
from .toy_likelihoods import contour_box

SAMPLER_KINDS = ("rejection", "ellipsoidal", "slice")
DEFAULT_MAX_PROPOSALS = 1_000_000
_EIG_FLOOR = 1e-12
_MAX_BATCH = 4096


@dataclass(frozen=True, slots=True)
class LivePoint:
    unit_coords: np.ndarray
    log_like: float
    birth_log_like: float = -math.inf


@dataclass(frozen=True)
class SamplerConfig:
    """Which constrained sampler to use and how to tune it.

    ``n_r=None`` means the recommended ``2 * d`` slice repeats.  ``bounded``
    lets the rejection sampler draw from the problem's analytic contour box
    when one exists; draws remain exact either way.
    """

    kind: str = "rejection"
    efr: float = 1.0
    n_r: int | None = None
    max_proposals: int = DEFAULT_MAX_PROPOSALS
    bounded: bool = True

    def __post_init__(self):
        if self.kind not in SAMPLER_KINDS:
            raise ContractError(f"unknown sampler {self.kind!r}; expected one of {SAMPLER_KINDS}")
        if not self.efr > 0:
            raise ContractError("efr must be positive")
        if self.n_r is not None and int(self.n_r) < 1:
            raise ContractError("n_r must be at least 1")
        if int(self.max_proposals) < 1:
            raise ContractError("max_proposals must be at least 1")

    def repeats(self, dimension):
        return 2 * dimension if self.n_r is None else int(self.n_r)


@dataclass(frozen=True)
class Ellipsoid:
    """``{x : (x - c)^T (chol chol^T)^-1 (x - c) <= 1}``."""

    center: np.ndarray
    chol: np.ndarray
    enlargement: float = 1.0
    degenerate: bool = False

    @property
    def shape(self):
        return self.chol @ self.chol.T

    @property
    def log_volume(self):
        d = len(self.center)
        log_unit_ball = 0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d + 1)
        return log_unit_ball + float(np.sum(np.log(np.diag(self.chol))))

    def contains(self, x):
        z = np.linalg.solve(self.chol, (np.atleast_2d(x) - self.center).T)
        return np.sum(z * z, axis=0) <= 1.0 + 1e-12

    def sample(self, rng, size):
        d = len(self.center)
        z = rng.standard_normal((size, d))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        z *= rng.random((size, 1)) ** (1.0 / d)
        return self.center + z @ self.chol.T


def _coords(live):
    if hasattr(live, "unit"):
        return live.unit
    return np.asarray(live, dtype=float)


def _covariance(points):
    """Sample covariance and whether it had to be regularised."""
    cov = np.atleast_2d(np.cov(points, rowvar=False))
    eigvals = np.linalg.eigvalsh(cov)
    if eigvals[0] <= _EIG_FLOOR:
        return np.diag(np.maximum(np.diag(cov), _EIG_FLOOR)), True
    return cov, False


def whitening_factor(live):
    """Lower Cholesky factor of the live-point covariance, eigenvalues floored."""
    cov = np.atleast_2d(np.cov(_coords(live), rowvar=False))
    vals, vecs = np.linalg.eigh(cov)
    vals = np.maximum(vals, _EIG_FLOOR)
    return np.linalg.cholesky((vecs * vals) @ vecs.T)


def fit_ellipsoid(live, efr=1.0):
    """Bounding ellipsoid of the live points, volume scaled by ``1/efr``.

    The sample covariance is rescaled so the farthest live point sits on the
    boundary, then the axes are multiplied by ``(1/efr)**(1/d)``.  A
    rank-deficient covariance falls back to its diagonal (floored at 1e-12)
    and the result is marked ``degenerate``.
    """
    points = _coords(live)
    n, d = points.shape
    if n <= d:
        raise ContractError(f"need more than d={d} live points to fit an ellipsoid, got {n}")
    if not efr > 0:
        raise ContractError("efr must be positive")
    center = points.mean(axis=0)
    cov, degenerate = _covariance(points)
    chol = np.linalg.cholesky(cov)
    z = np.linalg.solve(chol, (points - center).T)
    scale = float(np.max(np.sum(z * z, axis=0)))
    axis_factor = math.sqrt(scale) * (1.0 / efr) ** (1.0 / d)
    return Ellipsoid(center, chol * axis_factor, 1.0 / efr, degenerate)


def _batches(budget):
    used, size = 0, 8
    while used < budget:
        take = min(size, budget - used)
        yield used, take
        used += take
        size = min(2 * size, _MAX_BATCH)


def rejection_propose(problem, log_l_star, rng, budget=DEFAULT_MAX_PROPOSALS, bounded=True):
    """Exact constrained-prior draw by rejection.

    With ``bounded=True`` candidates come from the problem's contour box
    (see :func:`nsaudit.toy_likelihoods.contour_box`), otherwise from the whole prior.
    """
    if budget < 1:
        raise ContractError("budget must be at least 1")
    d = problem.dimension
    box = contour_box(problem, log_l_star) if bounded else None
    if box is None:
        lo, span = np.zeros(d), np.ones(d)
    else:
        lo, span = box[0], box[1] - box[0]
        if np.any(span <= 0):
            raise SamplerStall(f"constrained region above L*={log_l_star!r} is empty")
    for _, size in _batches(budget):
        unit = lo + span * rng.random((size, d))
        log_like = problem.log_like_unit(unit)
        hits = np.flatnonzero(log_like > log_l_star)
        if hits.size:
            k = hits[0]
            return LivePoint(unit[k], float(log_like[k]), log_l_star)
    raise SamplerStall(f"rejection sampler used its budget of {budget} proposals")


def ellipsoid_propose(problem, log_l_star, ellipsoid, rng, budget=DEFAULT_MAX_PROPOSALS):
    """Uniform draw from ellipsoid and unit cube, accepted when ``L > L*``."""
    if budget < 1:
        raise ContractError("budget must be at least 1")
    for _, size in _batches(budget):
        unit = ellipsoid.sample(rng, size)
        inside = np.flatnonzero(np.all((unit >= 0.0) & (unit <= 1.0), axis=1))
        if not inside.size:
            continue
        log_like = problem.log_like_unit(unit[inside])
        hits = np.flatnonzero(log_like > log_l_star)
        if hits.size:
            k = hits[0]
            return LivePoint(unit[inside[k]], float(log_like[k]), log_l_star)
    raise SamplerStall(f"ellipsoidal sampler used its budget of {budget} proposals")


def _chord(x, direction):
    """Parameter range ``t`` keeping ``x + t * direction`` inside the cube."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = -x / direction
        t1 = (1.0 - x) / direction
    moving = direction != 0
    lo = np.where(direction > 0, t0, t1)[moving]
    hi = np.where(direction > 0, t1, t0)[moving]
    return float(np.max(lo)), float(np.min(hi))


def slice_propose(problem, log_l_star, start, live, n_r, rng,
                  budget=DEFAULT_MAX_PROPOSALS, factor=None):
    """``n_r`` whitened slice-sampling updates starting from a live point.

    Each update picks a random direction in the space whitened by the
    live-point covariance, takes the whole chord through the unit cube as
    the bracket and shrinks it towards the current point until a candidate
    with ``L > L*`` is found.
    """
    if not start.log_like > log_l_star:
        raise ContractError("slice start point must lie strictly above L*")
    if n_r < 1:
        raise ContractError("n_r must be at least 1")
    if factor is None:
        factor = whitening_factor(live)
    d = problem.dimension
    x = np.array(start.unit_coords, dtype=float)
    log_like = start.log_like
    evaluations = 0
    for _ in range(n_r):
        u = rng.standard_normal(d)
        direction = factor @ (u / np.linalg.norm(u))
        t_lo, t_hi = _chord(x, direction)
        width = t_hi - t_lo
        while True:
            t = t_lo + (t_hi - t_lo) * rng.random()
            y = np.clip(x + t * direction, 0.0, 1.0)
            candidate = float(problem.log_like_unit(y))
            evaluations += 1
            if candidate > log_l_star:
                x, log_like = y, candidate
                break
            if t < 0:
                t_lo = t
            else:
                t_hi = t
            if t_hi - t_lo < 1e-15 * width:
                raise SamplerStall("slice bracket collapsed before finding L > L*")
            if evaluations >= budget:
                raise SamplerStall(f"slice sampler used its budget of {budget} evaluations")
    return LivePoint(x, log_like, log_l_star)
