import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cre_adjust.design import hat_from_covariates
from cre_adjust.errors import DegenerateDesignError, InputError
from cre_adjust.estimators import (ALL_KINDS, EstimatorKind, ObservedDataset, adj_via_slope,
                                   batch_estimates, estimate, estimate_all, parse_kind)
from cre_adjust.randomization import cre, sample_assignment
from cre_adjust.rng import stream


def dataset(n, p, n1, seed, y=None):
    gen = np.random.default_rng(seed)
    X = gen.normal(size=(n, p))
    t = sample_assignment(cre(n, n1), stream(seed, "t"))
    y = gen.normal(size=n) + 2 if y is None else y
    return ObservedDataset(X, t, y, cre(n, n1))


def test_unadj_is_scaled_treated_sum():
    data = dataset(10, 2, 4, 0)
    expected = data.y[data.t == 1].sum() / (10 * 0.4)
    assert estimate("unadj", data) == pytest.approx(expected, rel=1e-14)


def test_adj2_by_explicit_double_loop():
    data = dataset(9, 3, 4, 1)
    H = data.hat().H
    pi1 = data.design.pi1
    t, y, n = data.t, data.y, data.n
    unadj = np.sum(t * y) / (n * pi1)
    if22 = sum((t[i] / pi1 - 1) * H[i, j] * t[j] * y[j] / pi1
               for i in range(n) for j in range(n) if i != j) / n
    assert estimate("adj2", data) == pytest.approx(unadj - if22, rel=1e-12)
    odds = (1 - pi1) / pi1
    alpha = odds / (n * (n - 1)) * sum(H[i, i] * t[i] * y[i] / pi1 for i in range(n))
    assert estimate("adj3", data) == pytest.approx(unadj - if22 + alpha, rel=1e-12)


def test_adj1_keeps_diagonal_terms():
    data = dataset(9, 3, 4, 2)
    H = data.hat().H
    pi1, t, y, n = data.design.pi1, data.t, data.y, data.n
    unadj = np.sum(t * y) / (n * pi1)
    full = sum((t[i] / pi1 - 1) * H[i, j] * t[j] * y[j] / pi1 for i in range(n) for j in range(n)) / n
    assert estimate("adj1", data) == pytest.approx(unadj - full, rel=1e-12)


def test_adj_matches_ols_slope_route():
    for seed in range(5):
        data = dataset(15, 4, 7, seed)
        assert estimate("adj", data) == pytest.approx(adj_via_slope(data), rel=1e-10)


def test_db_equals_adj2_dagger():
    for seed in range(10):
        data = dataset(30, 8, 12, seed)
        assert estimate("db", data) == pytest.approx(estimate("adj2_dagger", data), rel=1e-11)


def test_constant_outcome_is_reproduced_by_centred_estimators():
    data = dataset(20, 5, 9, 3, y=np.full(20, 4.25))
    for kind in ("adj2_dagger", "db", "adj"):
        assert estimate(kind, data) == pytest.approx(4.25, rel=1e-12)


def test_no_covariates_collapse_to_unadj():
    data = dataset(12, 0, 5, 4)
    values = estimate_all(data)
    for kind in ALL_KINDS:
        assert values[kind] == pytest.approx(values[EstimatorKind.UNADJ], rel=1e-14)


def test_batch_matches_scalar():
    data = dataset(10, 2, 5, 6)
    H = data.hat().H
    T = np.stack([sample_assignment(data.design, stream(1, "b", k)) for k in range(5)])
    batch = batch_estimates("adj2", T, data.y, H, 0.5)
    for k in range(5):
        single = ObservedDataset(data.X, T[k], data.y, data.design)
        assert batch[k] == pytest.approx(estimate("adj2", single, data.hat()), rel=1e-14)


def test_no_treated_units():
    with pytest.raises(DegenerateDesignError):
        batch_estimates("unadj", np.zeros(5), np.ones(5), np.zeros((5, 5)), 0.5)


def test_dataset_validation():
    X = np.zeros((4, 1))
    X[:, 0] = [1, 2, 3, 4]
    with pytest.raises(InputError):
        ObservedDataset(X, np.array([1, 0, 2, 0]), np.ones(4), cre(4, 2))
    with pytest.raises(InputError, match="treated"):
        ObservedDataset(X, np.array([1, 1, 1, 0]), np.ones(4), cre(4, 2))
    with pytest.raises(InputError):
        ObservedDataset(X, np.array([1, 1, 0, 0]), np.array([1, np.nan, 0, 0]), cre(4, 2))


def test_parse_kind():
    assert parse_kind("ADJ2-dagger") is EstimatorKind.ADJ2_DAGGER
    with pytest.raises(InputError):
        parse_kind("ols")


@settings(max_examples=30, deadline=None)
@given(st.integers(6, 16), st.integers(0, 10_000), st.randoms(use_true_random=False))
def test_estimators_are_permutation_invariant(n, seed, rnd):
    data = dataset(n, 2, n // 2, seed)
    perm = list(range(n))
    rnd.shuffle(perm)
    shuffled = ObservedDataset(data.X[perm], data.t[perm], data.y[perm], data.design)
    for kind in ALL_KINDS:
        assert estimate(kind, shuffled) == pytest.approx(estimate(kind, data), rel=1e-9, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(6, 16), st.integers(0, 10_000), st.floats(-5, 5))
def test_shift_equivariance_of_centred_estimators(n, seed, c):
    data = dataset(n, 2, n // 2, seed)
    shifted = ObservedDataset(data.X, data.t, data.y + c, data.design)
    for kind in ("adj2_dagger", "db", "adj"):
        assert estimate(kind, shifted) == pytest.approx(estimate(kind, data) + c, rel=1e-9, abs=1e-9)
