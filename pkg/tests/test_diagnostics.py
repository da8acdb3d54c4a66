import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsaudit.constrained_samplers import SamplerConfig
from nsaudit.diagnostics import (
    InsertionSequence,
    TieAmbiguityWarning,
    insertion_index,
    kolmogorov_p,
    ks_statistic,
    ks_test_continuous,
    ks_test_uniform,
    reconstruct_indexes,
    rolling_p,
    sidak_adjust,
    simulate_perfect_ns,
    two_sample_ks,
)
from nsaudit.errors import ContractError, MalformedRunError
from nsaudit.ns_engine import NSSettings, run
from nsaudit.toy_likelihoods import make_problem


def kolmogorov_oracle(lam):
    """Survival function in 50-digit arithmetic, checked across both series forms."""
    mpmath.mp.dps = 50
    lam = mpmath.mpf(lam)
    direct = 2 * mpmath.nsum(lambda k: (-1) ** (k - 1) * mpmath.exp(-2 * k ** 2 * lam ** 2),
                             [1, mpmath.inf])
    cdf = mpmath.sqrt(2 * mpmath.pi) / lam * mpmath.nsum(
        lambda k: mpmath.exp(-(2 * k - 1) ** 2 * mpmath.pi ** 2 / (8 * lam ** 2)), [1, mpmath.inf])
    assert abs(direct - (1 - cdf)) < mpmath.mpf("1e-30")
    return float(direct)


def test_insertion_index_examples():
    assert insertion_index([], 3.0) == 0
    assert insertion_index([1, 2, 3], 2.0) == 1
    assert insertion_index([-math.inf, -math.inf, 5], -math.inf) == 0


def test_sequence_validation():
    with pytest.raises(ContractError):
        InsertionSequence([0, 3], 3)
    with pytest.raises(ContractError):
        InsertionSequence([-1], 3)
    with pytest.raises(ContractError):
        ks_statistic(InsertionSequence([], 3))


def test_ks_statistic_examples():
    assert ks_statistic(InsertionSequence(np.zeros(50, dtype=int), 1000)) == pytest.approx(0.999)
    assert ks_statistic(InsertionSequence(np.arange(1000), 1000)) == pytest.approx(0.0, abs=1e-15)
    assert ks_statistic(InsertionSequence([0, 1], 2)) == 0.0


@pytest.mark.parametrize("lam", [0.5, 1.0, 1.36, 2.0])
def test_kolmogorov_p_matches_dual_series(lam):
    n = 10_000
    assert kolmogorov_p(lam / math.sqrt(n), n) == pytest.approx(kolmogorov_oracle(lam), abs=1e-6)


def test_kolmogorov_p_examples():
    assert kolmogorov_p(0.0, 100) == 1.0
    assert kolmogorov_p(0.0136, 10_000) == pytest.approx(0.049, abs=5e-4)
    # lambda = 10: only the leading term 2 exp(-200) survives
    assert kolmogorov_p(1.0, 100) == pytest.approx(2 * math.exp(-200), rel=1e-12)
    with pytest.raises(ContractError):
        kolmogorov_p(1.5, 10)


def test_kolmogorov_p_monotone_in_d():
    d = np.linspace(0, 1, 2001)
    p = np.array([kolmogorov_p(x, 50) for x in d])
    assert np.all(np.diff(p) <= 0)
    assert np.all((p >= 0) & (p <= 1))


def test_all_equal_indexes_give_tiny_p():
    result = ks_test_uniform(InsertionSequence(np.zeros(5000, dtype=int), 500))
    assert result.p_value < 1e-100
    assert result.n_samples == 5000


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=5, max_size=60, unique=True),
       st.integers(0, 2**32 - 1))
def test_ks_statistic_invariant_under_monotone_relabel(values, seed):
    # indexes computed from likelihoods depend only on their order
    rng = np.random.default_rng(seed)
    ordered = sorted(values)
    # an arbitrary strictly increasing relabelling: cumulative random gaps
    relabelled = np.cumsum(rng.random(len(ordered)) + 0.01) - 50.0
    relabel = dict(zip(ordered, relabelled.tolist()))
    n_live = 5
    pools = [rng.choice(len(values), size=n_live, replace=False) for _ in range(30)]

    def indexes(label):
        out = []
        for pool in pools:
            labels = [label(values[k]) for k in pool]
            out.append(insertion_index(sorted(labels[:-1]), labels[-1]))
        return InsertionSequence(out, n_live)

    a = indexes(lambda v: v)
    b = indexes(relabel.__getitem__)
    np.testing.assert_array_equal(a.indexes, b.indexes)
    assert ks_statistic(a) == ks_statistic(b)


def test_sidak_adjust():
    assert sidak_adjust(0.5, 1) == 0.5
    assert sidak_adjust(0.1, 2) == pytest.approx(0.19, abs=1e-15)
    assert sidak_adjust(1e-12, 10) == pytest.approx(1e-11, rel=1e-9)


def test_rolling_p_one_chunk_identity():
    seq = InsertionSequence(np.random.default_rng(0).integers(0, 100, 80), 100)
    roll = rolling_p(seq)
    assert roll.n_chunks == 1
    assert roll.adjusted_p == roll.min_p == ks_test_uniform(seq).p_value


def test_rolling_p_crafted_chunks():
    n_live = 10
    good = np.arange(10)
    bad = np.zeros(10, dtype=int)
    seq = InsertionSequence(np.concatenate([good, bad, good]), n_live)
    roll = rolling_p(seq)
    assert roll.n_chunks == 3
    p_bad = ks_test_uniform(InsertionSequence(bad, n_live)).p_value
    assert roll.per_chunk_p == [1.0, p_bad, 1.0]
    assert roll.min_p == p_bad
    assert roll.adjusted_p == 1.0 - (1.0 - p_bad) ** 3


def test_rolling_p_short_tail_merged():
    seq = InsertionSequence(np.arange(209) % 100, 100)
    assert rolling_p(seq).n_chunks == 2
    seq = InsertionSequence(np.arange(210) % 100, 100)
    assert rolling_p(seq).n_chunks == 3


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 9), min_size=1, max_size=80))
def test_rolling_adjusted_at_least_min(indexes):
    roll = rolling_p(InsertionSequence(indexes, 10))
    assert roll.adjusted_p >= roll.min_p
    if roll.n_chunks == 1:
        assert roll.adjusted_p == roll.min_p


def test_two_sample_examples():
    a = np.random.default_rng(1).random(100)
    same = two_sample_ks(a, a)
    assert same.statistic_d == 0.0 and same.p_value == 1.0
    assert two_sample_ks([0.0], [1.0]).statistic_d == 1.0
    assert two_sample_ks(a, a + 0.0).n_samples == 50.0


def test_ks_test_continuous_uniform_null():
    p = ks_test_continuous(np.random.default_rng(2).random(5000)).p_value
    assert p > 1e-3
    assert ks_test_continuous(np.full(100, 0.999)).p_value < 1e-10


@pytest.mark.parametrize("n_live", [2, 10, 100])
def test_perfect_ns_marginal_uniformity(n_live):
    seq = simulate_perfect_ns(n_live, 100_000, np.random.default_rng(n_live))
    counts = np.bincount(seq.indexes, minlength=n_live)
    p = 1 / n_live
    sigma = math.sqrt(100_000 * p * (1 - p))
    assert np.all(np.abs(counts - 100_000 * p) < 5 * sigma)


def test_perfect_ns_smallest_case():
    seq = simulate_perfect_ns(2, 10_000, np.random.default_rng(3))
    assert set(np.unique(seq.indexes)) == {0, 1}
    assert np.mean(seq.indexes) == pytest.approx(0.5, abs=0.03)
    with pytest.raises(ContractError):
        simulate_perfect_ns(1, 10, np.random.default_rng(0))


def test_reconstruct_hand_example():
    seq = reconstruct_indexes([1, 2, 3, 4], [-math.inf, -math.inf, 1, 2], 2)
    assert seq.indexes.tolist() == [1, 1]


def test_reconstruct_unmatched_birth():
    with pytest.raises(MalformedRunError, match="record 3"):
        reconstruct_indexes([1, 2, 3, 8], [-math.inf, -math.inf, 1, 7], 2)


def test_reconstruct_death_below_birth():
    with pytest.raises(MalformedRunError, match="record 2"):
        reconstruct_indexes([1, 2, 0.5, 4], [-math.inf, -math.inf, 1, 2], 2)


def test_reconstruct_too_few_seeds():
    with pytest.raises(MalformedRunError):
        reconstruct_indexes([1, 2, 3], [-math.inf, 1, 2], 2)


def test_reconstruct_birth_after_drain():
    # a death with no replacement, then a later replacement: n_live changed mid-run
    with pytest.raises(MalformedRunError):
        reconstruct_indexes([1, 2, 3, 5], [-math.inf, -math.inf, 2, 3], 2)


@pytest.mark.parametrize("kind, d, sampler", [
    ("gaussian", 2, SamplerConfig()),
    ("shells", 2, SamplerConfig("slice")),
    ("mixture", 2, SamplerConfig("ellipsoidal")),
])
def test_reconstruct_round_trip(kind, d, sampler):
    trace = run(make_problem(kind, d), NSSettings(n_live=40, sampler=sampler, rng_seed=8))
    death, birth = trace.all_points()
    with warnings.catch_warnings():
        warnings.simplefilter("error", TieAmbiguityWarning)
        seq = reconstruct_indexes(death, birth, 40)
    np.testing.assert_array_equal(seq.indexes, trace.insertion_indexes)


def test_reconstruct_plateau_warns_and_keeps_multiset():
    trace = run(make_problem("plateau"), NSSettings(n_live=40, rng_seed=2))
    death, birth = trace.all_points()
    with pytest.warns(TieAmbiguityWarning):
        seq = reconstruct_indexes(death, birth, 40)
    assert seq.notes
    assert sorted(seq.indexes.tolist()) == sorted(trace.insertion_indexes.tolist())
