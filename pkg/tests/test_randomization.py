import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cre_adjust.errors import ResourceError, UsageError
from cre_adjust.randomization import (PAIR_PATTERNS, PATTERNS, assignment_matrix, bernoulli,
                                      count_assignments, cre, cre_db_moment, cre_from_ratio,
                                      cre_pair_covariance_scalar, cre_product_moment,
                                      enumerate_assignments, written_covariance_scalars,
                                      sample_assignment, sample_assignments)
from cre_adjust.rng import stream

DESIGNS = [(6, 3), (8, 3), (8, 4)]


def test_cre_sample_has_exactly_n1_treated():
    d = cre(10, 3)
    gen = stream(1, "test")
    for _ in range(50):
        assert sample_assignment(d, gen).sum() == 3


def test_cre_sample_is_uniform_over_subsets():
    d = cre(4, 2)
    T = sample_assignments(d, stream(7, "uniform"), 12000)
    counts = Counter(tuple(row) for row in T)
    assert len(counts) == 6
    # each subset has probability 1/6; 5 sd band
    sd = math.sqrt(12000 * (1 / 6) * (5 / 6))
    assert all(abs(c - 2000) < 5 * sd for c in counts.values())


def test_bernoulli_rate():
    T = sample_assignments(bernoulli(50, 0.3), stream(2, "b"), 400)
    assert abs(T.mean() - 0.3) < 0.01


def test_sampling_is_reproducible():
    d = cre(20, 7)
    a = sample_assignments(d, stream(5, "x", 3), 10)
    b = sample_assignments(d, stream(5, "x", 3), 10)
    c = sample_assignments(d, stream(5, "x", 4), 10)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_cre_from_ratio_rounds_up():
    d = cre_from_ratio(10, 2 / 3)
    assert d.n1 == 7 and d.pi1 == pytest.approx(0.7)


@pytest.mark.parametrize("n,n1", [(0, 0), (5, 0), (5, 6)])
def test_invalid_cre(n, n1):
    with pytest.raises(UsageError):
        cre(n, n1)


def test_enumeration_is_lexicographic_and_complete():
    d = cre(5, 2)
    rows = [tuple(np.flatnonzero(t)) for t in enumerate_assignments(d)]
    assert rows == sorted(rows)
    assert len(set(rows)) == math.comb(5, 2) == count_assignments(d)
    assert np.array_equal(assignment_matrix(d), np.stack(list(enumerate_assignments(d))))


def test_enumeration_slices_partition_the_order():
    d = cre(7, 3)
    full = assignment_matrix(d)
    parts = np.vstack([assignment_matrix(d, start=s, stop=s + 8) for s in range(0, 35, 8)])
    assert np.array_equal(full, parts)


def test_enumeration_cap():
    with pytest.raises(ResourceError, match="Monte Carlo"):
        assignment_matrix(cre(30, 15))


def test_enumeration_needs_cre():
    with pytest.raises(UsageError):
        list(enumerate_assignments(bernoulli(5, 0.5)))


def test_product_moment_examples():
    d = cre(10, 5)
    assert cre_product_moment(d, 0) == 1.0
    assert cre_product_moment(d, 1) == 0.5
    assert cre_product_moment(d, 2) == pytest.approx(0.5 * 4 / 9)
    assert cre_product_moment(cre(4, 2), 3) == 0.0
    assert cre_product_moment(bernoulli(10, 0.3), 3) == pytest.approx(0.027)


@pytest.mark.parametrize("n,n1", DESIGNS)
def test_product_moment_matches_enumeration(n, n1):
    d = cre(n, n1)
    T = assignment_matrix(d).astype(float)
    for j in range(0, n + 1):
        enumerated = T[:, :j].prod(axis=1).mean() if j else 1.0
        assert cre_product_moment(d, j) == pytest.approx(enumerated, abs=1e-12)


def _term(T, pattern, pi1):
    if pattern in PAIR_PATTERNS:
        a, b = PAIR_PATTERNS[pattern] if pattern != "var" else (1, 2)
        return (T[:, a - 1] / pi1 - 1) * T[:, b - 1]
    return T[:, {"u_other": 2, "u_first": 0, "u_second": 1}[pattern]]


@pytest.mark.parametrize("n,n1", DESIGNS)
def test_pattern_scalars_match_enumeration(n, n1):
    d = cre(n, n1)
    T = assignment_matrix(d).astype(float)
    first = (T[:, 0] / d.pi1 - 1) * T[:, 1]
    for pattern in PATTERNS:
        other = _term(T, pattern, d.pi1)
        enumerated = np.mean(first * other) - first.mean() * other.mean()
        assert cre_pair_covariance_scalar(d, pattern) == pytest.approx(enumerated, abs=1e-12)


@pytest.mark.parametrize("n,n1", DESIGNS)
def test_written_forms_agree_with_generic(n, n1):
    d = cre(n, n1)
    for pattern, forms in written_covariance_scalars(d).items():
        generic = cre_pair_covariance_scalar(d, pattern)
        for f in forms:
            assert f == pytest.approx(generic, abs=1e-12), pattern


def test_unknown_pattern():
    with pytest.raises(UsageError):
        cre_pair_covariance_scalar(cre(8, 4), "sideways")


def test_disjoint_pattern_needs_four_units():
    with pytest.raises(UsageError):
        cre_pair_covariance_scalar(cre(3, 2), "disjoint")


@pytest.mark.parametrize("m", [1, 2, 3])
@pytest.mark.parametrize("which", ["first", "second"])
def test_db_moment_matches_enumeration(m, which):
    d = cre(8, 4)
    y = np.random.default_rng(m).normal(size=8) + 1
    T = assignment_matrix(d).astype(float)
    unadj = T @ y / (d.n * d.pi1)
    idx = (1, 4, 6)[:m]
    t_s = T[:, list(idx)].prod(axis=1)
    enumerated = np.mean(t_s * (unadj if which == "first" else unadj**2))
    assert cre_db_moment(d, m, y, which, idx) == pytest.approx(enumerated, abs=1e-12)


def test_db_moment_rejects_repeated_indices():
    with pytest.raises(UsageError):
        cre_db_moment(cre(8, 4), 2, np.ones(8), "first", (1, 1))


@settings(max_examples=25, deadline=None)
@given(st.integers(4, 9).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n - 1))))
def test_product_moments_are_falling_ratios(nn1):
    n, n1 = nn1
    d = cre(n, n1)
    for j in range(1, n + 1):
        expected = math.comb(n - j, n1 - j) / math.comb(n, n1) if j <= n1 else 0.0
        assert cre_product_moment(d, j) == pytest.approx(expected, rel=1e-12, abs=1e-300)
