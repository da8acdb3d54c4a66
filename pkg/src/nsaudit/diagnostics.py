"""Insertion-index uniformity checks for single nested-sampling runs.

If every replacement point is a genuine draw from the constrained prior, its
insertion index among the ``n_live - 1`` surviving live points is discrete
uniform on ``0 .. n_live - 1``.  The tests here compare the observed indexes
with that distribution using a Kolmogorov-Smirnov statistic and the
asymptotic Kolmogorov p-value.  Applied to discrete data the p-values are
conservative; no correction is made for that, nor for correlations between
successive indexes.
"""

from bisect import bisect_left, insort
from collections import defaultdict, deque
from dataclasses import dataclass, field
import heapq
import math
import warnings

import numpy as np

from .errors import ContractError, MalformedRunError

MIN_FINAL_CHUNK = 10
_SERIES_TOL = 1e-16
# below this lambda the dual (theta-function) series is used
_DUAL_BELOW = 1.18


class TieAmbiguityWarning(UserWarning):
    """Birth contours matched more than one candidate; resolved first-in first-out."""


@dataclass
class InsertionSequence:
    indexes: np.ndarray
    n_live: int
    notes: list = field(default_factory=list)

    def __post_init__(self):
        self.indexes = np.asarray(self.indexes, dtype=int)
        self.n_live = int(self.n_live)
        if self.n_live < 1:
            raise ContractError("n_live must be positive")
        if self.indexes.size and (self.indexes.min() < 0 or self.indexes.max() >= self.n_live):
            raise ContractError(f"insertion indexes must lie in [0, {self.n_live - 1}]")

    def __len__(self):
        return int(self.indexes.size)


@dataclass(frozen=True)
class KSResult:
    statistic_d: float
    n_samples: float
    p_value: float


@dataclass(frozen=True)
class RollingResult:
    min_p: float
    n_chunks: int
    adjusted_p: float
    per_chunk_p: list


def insertion_index(sorted_log_likes, new_log_like):
    """Number of entries strictly below ``new_log_like`` (left-sided rule)."""
    return bisect_left(sorted_log_likes, new_log_like)


def _require_nonempty(seq):
    if len(seq) == 0:
        raise ContractError("insertion sequence is empty")


def ks_statistic(seq):
    """Largest gap between the empirical CDF and ``(k + 1) / n_live``."""
    _require_nonempty(seq)
    counts = np.bincount(seq.indexes, minlength=seq.n_live)
    empirical = np.cumsum(counts) / seq.indexes.size
    reference = np.arange(1, seq.n_live + 1) / seq.n_live
    return float(np.max(np.abs(empirical - reference)))


def kolmogorov_p(statistic_d, n):
    """Asymptotic Kolmogorov survival function at ``lambda = sqrt(n) * D``.

    ``2 * sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2)``, summed until a term
    drops below 1e-16 and clamped to [0, 1].  For small ``lambda`` that
    alternating series cancels badly, so the same function is evaluated as
    one minus the dual series ``sqrt(2 pi) / lambda * sum_{k>=1}
    exp(-(2k - 1)^2 pi^2 / (8 lambda^2))``, which converges quickly there.
    """
    if not 0.0 <= statistic_d <= 1.0:
        raise ContractError("KS statistic must lie in [0, 1]")
    lam = math.sqrt(n) * statistic_d
    if lam == 0.0:
        return 1.0
    if lam < _DUAL_BELOW:
        a = -math.pi ** 2 / (8.0 * lam * lam)
        total, k = 0.0, 1
        while True:
            term = math.exp(a * (2 * k - 1) ** 2)
            total += term
            if term < _SERIES_TOL:
                break
            k += 1
        return min(1.0, max(0.0, 1.0 - math.sqrt(2.0 * math.pi) / lam * total))
    a = -2.0 * lam * lam
    total, k, sign = 0.0, 1, 1.0
    while True:
        term = math.exp(a * k * k)
        total += sign * term
        if term < _SERIES_TOL:
            break
        sign, k = -sign, k + 1
    return min(1.0, max(0.0, 2.0 * total))


def ks_test_uniform(seq):
    """One-sample KS test of insertion indexes against the discrete uniform."""
    d = ks_statistic(seq)
    n = len(seq)
    return KSResult(d, n, kolmogorov_p(d, n))


def ks_test_continuous(samples):
    """One-sample KS test of ``samples`` against U(0, 1)."""
    u = np.sort(np.asarray(samples, dtype=float))
    if u.size == 0:
        raise ContractError("no samples")
    n = u.size
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - u), np.max(u - (i - 1) / n)))
    d = min(max(d, 0.0), 1.0)
    return KSResult(d, n, kolmogorov_p(d, n))


def _chunks(indexes, size):
    bounds = list(range(0, indexes.size, size))
    pieces = [indexes[b:b + size] for b in bounds]
    if len(pieces) > 1 and pieces[-1].size < MIN_FINAL_CHUNK:
        tail = pieces.pop()
        pieces[-1] = np.concatenate([pieces[-1], tail])
    return pieces


def sidak_adjust(p, n_tests):
    """``1 - (1 - p)^n``, accurate for tiny ``p`` and exact for one test."""
    if n_tests == 1:
        return p
    if p < 1e-8:
        adjusted = -math.expm1(n_tests * math.log1p(-p))
    else:
        adjusted = 1.0 - (1.0 - p) ** n_tests
    return max(adjusted, p)


def rolling_p(seq):
    """Minimum KS p-value over consecutive ``n_live``-sized chunks, adjusted.

    A trailing chunk shorter than ``MIN_FINAL_CHUNK`` indexes is merged into
    the previous chunk.
    """
    _require_nonempty(seq)
    per_chunk = [ks_test_uniform(InsertionSequence(chunk, seq.n_live)).p_value
                 for chunk in _chunks(seq.indexes, seq.n_live)]
    p = min(per_chunk)
    return RollingResult(p, len(per_chunk), sidak_adjust(p, len(per_chunk)), per_chunk)


def two_sample_ks(a, b):
    """Two-sample KS test; effective size ``n_a n_b / (n_a + n_b)``."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ContractError("both samples must be non-empty")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    n_eff = a.size * b.size / (a.size + b.size)
    return KSResult(d, n_eff, kolmogorov_p(d, n_eff))


def simulate_perfect_ns(n_live, n_iter, rng):
    """Insertion indexes of an ideal run, simulated on volumes alone.

    Live points are represented by their enclosed prior volumes, kept as
    logarithms so long runs do not underflow.  Each iteration removes the
    largest volume and draws the replacement uniformly below it; the
    insertion index counts survivors with a larger volume (lower
    likelihood).
    """
    if n_live < 2:
        raise ContractError("n_live must be at least 2")
    # 1 - U lies in (0, 1], so every logarithm is finite
    log_volumes = sorted(np.log1p(-rng.random(n_live)).tolist())
    log_fractions = np.log1p(-rng.random(n_iter)).tolist()
    out = np.empty(n_iter, dtype=int)
    survivors = n_live - 1
    for it, log_f in enumerate(log_fractions):
        new = log_volumes.pop() + log_f
        pos = bisect_left(log_volumes, new)
        out[it] = survivors - pos
        log_volumes.insert(pos, new)
    return InsertionSequence(out, n_live)


def reconstruct_indexes(death, birth, n_live):
    """Replay a run from its death and birth contours.

    ``death``/``birth`` hold every point of the run: dead points and the
    final live points.  Points born at ``-inf`` seed the live set; each time
    the lowest live point dies, the point born on its contour joins and its
    insertion index among the survivors is recorded.  Replacements of
    zero-likelihood points are recorded in the tied slot, as the engine
    does.

    Raises
    ------
    MalformedRunError
        If a birth contour matches no death, a point dies below its birth,
        or the number of live points changes mid-run.
    """
    death = np.asarray(death, dtype=float)
    birth = np.asarray(birth, dtype=float)
    if death.shape != birth.shape:
        raise ContractError("death and birth arrays differ in length")
    n_live = int(n_live)
    notes = []
    bad = np.flatnonzero(death < birth)
    if bad.size:
        k = int(bad[0])
        raise MalformedRunError(
            f"record {k} dies at {float(death[k])!r} below its birth contour {float(birth[k])!r}", k)

    born_on = defaultdict(deque)
    for k, b in enumerate(birth.tolist()):
        born_on[b].append(k)
    seeds = born_on.pop(-math.inf, deque())
    if len(seeds) < n_live:
        raise MalformedRunError(
            f"only {len(seeds)} points born at -inf, expected n_live={n_live}")
    if len(seeds) > n_live or any(len(q) > 1 for q in born_on.values()):
        notes.append("ambiguous birth contours matched first-in first-out")
    initial = [seeds.popleft() for _ in range(n_live)]
    if seeds:
        born_on[-math.inf] = seeds

    heap = [(death[k], seq, k) for seq, k in enumerate(initial)]
    heapq.heapify(heap)
    seq = len(heap)
    live = sorted(death[initial].tolist())
    indexes = []
    draining = False
    while heap:
        dead, _, _ = heapq.heappop(heap)
        del live[bisect_left(live, dead)]
        queue = born_on.get(dead)
        if not queue:
            draining = True
            continue
        if draining:
            k = queue[0]
            raise MalformedRunError(
                f"record {k} is born after the live set began to shrink", k)
        k = queue.popleft()
        value = float(death[k])
        indexes.append(bisect_left(live, dead if dead == -math.inf else value))
        insort(live, value)
        heapq.heappush(heap, (value, seq, k))
        seq += 1

    leftover = [q[0] for q in born_on.values() if q]
    if leftover:
        k = min(leftover)
        raise MalformedRunError(
            f"record {k} has birth contour {float(birth[k])!r} matching no death", k)
    if notes:
        warnings.warn(notes[0], TieAmbiguityWarning, stacklevel=2)
    return InsertionSequence(np.array(indexes, dtype=int), n_live, notes)
