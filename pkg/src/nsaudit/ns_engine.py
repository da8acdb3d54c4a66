"""Nested-sampling main loop.

Each iteration removes the lowest-likelihood live point, replaces it with a
constrained-prior draw and records where the replacement slots into the
sorted likelihoods of the ``n_live - 1`` survivors.  The run stops once the
largest possible remaining evidence, ``X_i * L_max``, is below ``epsilon``
times the evidence accumulated so far.
"""

from bisect import bisect_left, insort
from dataclasses import dataclass, field
import heapq
import logging
import math

import numpy as np

from .errors import ContractError, SamplerStall
from .constrained_samplers import (
    LivePoint,
    SamplerConfig,
    ellipsoid_propose,
    fit_ellipsoid,
    rejection_propose,
    slice_propose,
    whitening_factor,
)

logger = logging.getLogger(__name__)

_INIT_STREAM = 1
_PROPOSAL_STREAM = 2


@dataclass(frozen=True)
class NSSettings:
    n_live: int = 500
    epsilon: float = 0.01
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    rng_seed: int = 0
    max_iterations: int = 10_000_000

    def __post_init__(self):
        if int(self.n_live) < 2:
            raise ContractError("n_live must be at least 2")
        if not 0.0 < self.epsilon < 1.0:
            raise ContractError("epsilon must lie in (0, 1)")
        if int(self.max_iterations) < 1:
            raise ContractError("max_iterations must be positive")


@dataclass(frozen=True, slots=True)
class DeadPointRecord:
    """One iteration: the removed point and the replacement's insertion index."""

    iteration: int
    log_like_death: float
    log_like_birth: float
    insertion_index: int
    n_live_at_iter: int


@dataclass
class NSTrace:
    records: list
    final_live_points: list
    settings: NSSettings
    terminated_by: str
    problem: object = None
    metadata: dict = field(default_factory=dict)

    @property
    def n_iter(self):
        return len(self.records)

    @property
    def death_log_likes(self):
        return np.array([r.log_like_death for r in self.records], dtype=float)

    @property
    def birth_log_likes(self):
        return np.array([r.log_like_birth for r in self.records], dtype=float)

    @property
    def insertion_indexes(self):
        return np.array([r.insertion_index for r in self.records], dtype=int)

    def all_points(self):
        """Death and birth contours of every point, dead ones first."""
        live = self.final_live_points
        death = np.concatenate([self.death_log_likes, [p.log_like for p in live]])
        birth = np.concatenate([self.birth_log_likes, [p.birth_log_like for p in live]])
        return death, birth


class LivePointSet:
    """Fixed-capacity live points with heap access to the worst one.

    Ties in log-likelihood are broken first-in first-out.  A sorted list of
    the live log-likelihoods is kept alongside for insertion indexes.
    """

    def __init__(self, unit, log_like, birth=None):
        self.unit = np.array(unit, dtype=float)
        self.log_like = np.array(log_like, dtype=float)
        n = len(self.log_like)
        self.birth = np.full(n, -math.inf) if birth is None else np.array(birth, dtype=float)
        self._seq = n
        self._heap = [(ll, i, i) for i, ll in enumerate(self.log_like.tolist())]
        heapq.heapify(self._heap)
        self._sorted = sorted(self.log_like.tolist())

    def __len__(self):
        return len(self.log_like)

    @property
    def capacity(self):
        return len(self.log_like)

    def worst(self):
        """Slot index of the lowest-likelihood point."""
        return self._heap[0][2]

    def point(self, slot):
        return LivePoint(self.unit[slot].copy(), float(self.log_like[slot]), float(self.birth[slot]))

    def points(self):
        return [self.point(i) for i in range(len(self))]

    def sorted_log_likes(self):
        return list(self._sorted)

    def replace_worst(self, new):
        """Swap the worst point for ``new``; return (removed point, insertion index)."""
        _, _, slot = heapq.heappop(self._heap)
        removed = self.point(slot)
        del self._sorted[bisect_left(self._sorted, removed.log_like)]
        if removed.log_like == -math.inf:
            # replacement of a zero-likelihood point cannot be ordered against the
            # zero-likelihood plateau; it is recorded in the tied slot
            index = bisect_left(self._sorted, removed.log_like)
        else:
            index = bisect_left(self._sorted, new.log_like)
        insort(self._sorted, new.log_like)
        self.unit[slot] = new.unit_coords
        self.log_like[slot] = new.log_like
        self.birth[slot] = new.birth_log_like
        heapq.heappush(self._heap, (new.log_like, self._seq, slot))
        self._seq += 1
        return removed, index


def make_streams(seed):
    """Initialisation and proposal generators derived from one seed."""
    base = np.random.PCG64(int(seed) & 0xFFFF_FFFF_FFFF_FFFF)
    return (np.random.Generator(base.jumped(_INIT_STREAM)),
            np.random.Generator(base.jumped(_PROPOSAL_STREAM)))


def initialize(problem, settings, rng=None):
    """Draw ``n_live`` points uniformly from the unit cube."""
    if rng is None:
        rng, _ = make_streams(settings.rng_seed)
    unit = rng.random((settings.n_live, problem.dimension))
    return LivePointSet(unit, problem.log_like_unit(unit))


def _propose(live, problem, sampler, log_l_star, rng, metadata):
    budget = int(sampler.max_proposals)
    if sampler.kind == "ellipsoidal":
        ellipsoid = fit_ellipsoid(live, sampler.efr)
        if ellipsoid.degenerate:
            metadata["degenerate_ellipsoids"] = metadata.get("degenerate_ellipsoids", 0) + 1
        return ellipsoid_propose(problem, log_l_star, ellipsoid, rng, budget)
    if sampler.kind == "slice":
        above = np.flatnonzero(live.log_like > log_l_star)
        if above.size:
            start = live.point(above[rng.integers(above.size)])
            factor = whitening_factor(live)
            return slice_propose(problem, log_l_star, start, live,
                                 sampler.repeats(problem.dimension), rng, budget, factor)
        # every live point sits on the contour: no valid slice start exists
        metadata["slice_fallbacks"] = metadata.get("slice_fallbacks", 0) + 1
    return rejection_propose(problem, log_l_star, rng, budget, sampler.bounded)


def step(live, problem, settings, rng, iteration=0, metadata=None):
    """Remove the worst live point and replace it from the constrained prior.

    Returns ``(record, live)``; ``live`` is updated in place.
    """
    if metadata is None:
        metadata = {}
    slot = live.worst()
    log_l_star = float(live.log_like[slot])
    try:
        new = _propose(live, problem, settings.sampler, log_l_star, rng, metadata)
    except SamplerStall as exc:
        exc.iteration = iteration
        raise
    removed, index = live.replace_worst(new)
    record = DeadPointRecord(iteration, removed.log_like, removed.birth_log_like,
                             index, live.capacity)
    return record, live


def run(problem, settings):
    """Run nested sampling to termination and return the full trace.

    Raises
    ------
    SamplerStall
        With ``trace`` set to the partial run (``terminated_by`` is
        ``"sampler_stall"``) and ``iteration`` set to the failing iteration.
    """
    init_rng, rng = make_streams(settings.rng_seed)
    live = initialize(problem, settings, init_rng)
    n_live = settings.n_live
    log_eps = math.log(settings.epsilon)
    records = []
    metadata = {}
    log_z = -math.inf
    log_x_prev = 0.0
    terminated_by = "max_iterations"
    i = 0
    while i < settings.max_iterations:
        log_x = -i / n_live
        if log_z > -math.inf and log_x + float(live.log_like.max()) - log_z < log_eps:
            terminated_by = "evidence_fraction"
            break
        try:
            record, live = step(live, problem, settings, rng, i, metadata)
        except SamplerStall as exc:
            exc.trace = NSTrace(records, live.points(), settings, "sampler_stall",
                                problem, metadata)
            raise
        records.append(record)
        i += 1
        log_x_prev, log_x = log_x, -i / n_live
        if record.log_like_death > -math.inf:
            shell = log_x_prev + math.log(-math.expm1(log_x - log_x_prev))
            log_z = np.logaddexp(log_z, record.log_like_death + shell)
    logger.debug("run finished after %d iterations (%s)", i, terminated_by)
    return NSTrace(records, live.points(), settings, terminated_by, problem, metadata)
