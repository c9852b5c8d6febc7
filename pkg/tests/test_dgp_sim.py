import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import kendalltau

from cre_adjust import moments
from cre_adjust.dgp import (DgpConfig, coefficients, covariate_rows, generate_population,
                            scale_vector, signal)
from cre_adjust.errors import UsageError
from cre_adjust.population import FixedPopulation
from cre_adjust.randomization import cre
from cre_adjust.simulate import (OracleGrid, coefficient_of_variation_sq, oracle_rows, oracle_sim,
                                 realistic_sim)


def test_rows_are_nested_across_p_and_n():
    a = covariate_rows(4, range(10), 3)
    b = covariate_rows(4, range(12), 9)
    np.testing.assert_array_equal(a, b[:10, :3])


def test_covariate_correlation_structure():
    # Pearson correlation is too noisy under t3 tails; for elliptical laws
    # sin(pi/2 * kendall tau) recovers the shape matrix entry exactly
    X = covariate_rows(1, range(20000), 3)
    for (a, b), target in {(0, 1): 0.1, (1, 2): 0.1, (0, 2): 0.01}.items():
        rho = math.sin(math.pi / 2 * kendalltau(X[:, a], X[:, b])[0])
        assert rho == pytest.approx(target, abs=0.02)


def test_coefficients_alternate():
    np.testing.assert_allclose(coefficients(4), [-1, 1 / math.sqrt(2), -1 / math.sqrt(3), 0.5])


def test_nonlinear_signal():
    X = np.array([[2.0], [-0.5]])
    u = -X[:, 0]
    np.testing.assert_allclose(signal(X, "nonlinear"), np.sign(u) * np.abs(u) ** 0.5 + np.sin(u))


def test_scale_vector_has_mean_zero_unit_norm():
    v = scale_vector([3.0, 1.0, 4.0, 1.0, 5.0])
    assert abs(v.mean()) < 1e-15
    assert np.linalg.norm(v) == pytest.approx(1.0)


@pytest.mark.parametrize("model", ["linear", "nonlinear"])
@pytest.mark.parametrize("error", ["t3", "worst-case"])
def test_error_variance_is_signal_over_gamma(model, error):
    cfg = DgpConfig(n=80, alpha=0.1, outcome_model=model, error_kind=error, gamma=2.5, seed=3)
    pop = generate_population(cfg)
    X_full = covariate_rows(cfg.seed, range(cfg.n), cfg.p)
    f = signal(X_full, model)
    noise = pop.y1 - 1 - f
    assert np.var(noise, ddof=1) == pytest.approx(np.var(f, ddof=1) / 2.5, rel=1e-10)


def test_large_gamma_leaves_only_signal():
    cfg = DgpConfig(n=40, alpha=0.1, gamma=1e12, seed=1)
    pop = generate_population(cfg)
    f = signal(covariate_rows(cfg.seed, range(40), cfg.p), "linear")
    np.testing.assert_allclose(pop.y1, 1 + f, atol=1e-5)


def test_worst_case_error_is_orthogonal_to_covariates():
    cfg = DgpConfig(n=60, alpha=0.2, error_kind="worst-case", seed=2)
    pop = generate_population(cfg)
    f = signal(pop.X, "linear")
    eps = pop.y1 - 1 - f
    # eps is a multiple of (I - H) h, so H eps = 0
    assert np.linalg.norm(pop.hat.H @ eps) <= 1e-8 * np.linalg.norm(eps)


def test_pool_level_worst_case_runs():
    cfg = DgpConfig(n=30, alpha=0.1, error_kind="worst-case", worst_case_hat="pool", N=400, seed=2)
    pop = generate_population(cfg)
    assert pop.n == 30 and np.all(np.isfinite(pop.y1))


def test_config_validation():
    with pytest.raises(UsageError):
        DgpConfig(alpha=1.0)
    with pytest.raises(UsageError):
        DgpConfig(gamma=0)
    with pytest.raises(UsageError):
        DgpConfig(n=6000)
    with pytest.raises(UsageError):
        DgpConfig(outcome_model="cubic")


def test_p_rounds_up():
    assert DgpConfig(n=50, alpha=0.05).p == 3
    assert DgpConfig(n=100, alpha=0.05).p == 5


def test_population_is_deterministic():
    cfg = DgpConfig(n=50, alpha=0.2, seed=9)
    np.testing.assert_array_equal(generate_population(cfg).y1, generate_population(cfg).y1)


# -- oracle simulation ---------------------------------------------------------

def test_no_covariate_row_has_unit_efficiency():
    rows = oracle_rows(DgpConfig(n=40, alpha=0.0, seed=1))
    for r in rows:
        assert r["p"] == 0
        assert r["relative_efficiency"] == pytest.approx(1.0, rel=1e-12)


def test_dagger_and_db_rows_agree():
    rows = oracle_sim(OracleGrid(n=(50, 100), alpha=(0.1, 0.4), outcome_model=("linear",),
                                 error_kind=("t3", "worst-case")))
    by_key = {}
    for r in rows:
        key = (r["n"], r["alpha"], r["error_kind"])
        by_key.setdefault(key, {})[r["estimator"]] = r["relative_efficiency"]
    for vals in by_key.values():
        assert vals["adj2_dagger"] == vals["db"]


def test_linear_small_alpha_gains_efficiency():
    rows = oracle_rows(DgpConfig(n=500, alpha=0.05, seed=3))
    adj2 = [r for r in rows if r["estimator"] == "adj2" and r["variance_kind"] == "exact"][0]
    assert adj2["relative_efficiency"] < 1


def test_small_cov2_favours_centering():
    # shifting the outcome raises taubar, so CoV^2 falls; the centred estimator's variance does not move
    cfg = DgpConfig(n=100, alpha=0.3, seed=4)
    base = generate_population(cfg)
    d = cre(100, 50)
    ratios, cov2 = [], []
    for shift in (0.0, 2.0, 5.0, 20.0):
        pop = base.with_outcome(base.y1 + shift)
        cov2.append(coefficient_of_variation_sq(pop))
        ratios.append(moments.nu_f(pop, d).variance / moments.nu_f_dagger(pop, d).variance)
    assert cov2 == sorted(cov2, reverse=True)
    assert ratios == sorted(ratios)  # nu_f / nu_f_dagger grows as CoV^2 shrinks


def test_cov2_infinite_when_mean_zero():
    pop = FixedPopulation(np.arange(6.0)[:, None], np.array([-1.0, 1, -2, 2, -3, 3]))
    assert coefficient_of_variation_sq(pop) == math.inf


def test_oracle_sim_workers_do_not_change_rows():
    grid = OracleGrid(n=(50,), alpha=(0.1, 0.3), outcome_model=("linear", "nonlinear"), error_kind=("t3",))
    assert oracle_sim(grid) == oracle_sim(grid, workers=3)


# -- realistic simulation ------------------------------------------------------

@pytest.fixture(scope="module")
def small_sim():
    return realistic_sim(DgpConfig(n=60, alpha=0.1, seed=5), K=600)


def test_metric_ranges(small_sim):
    for r in small_sim.rows:
        assert 0 <= r["coverage"] <= 1
        assert r["rmse"] >= 0 and r["ci_length"] >= 0


def test_rmse_decomposition(small_sim):
    for r in small_sim.rows:
        assert r["rmse"] ** 2 == pytest.approx(r["bias"] ** 2 + r["mc_variance"], rel=1e-10)


def test_unadj_mean_within_mc_error():
    sim = realistic_sim(DgpConfig(n=60, alpha=0.1, seed=6), K=20000, estimators=("unadj",),
                        var_estimators=("unbiased",))
    r = sim.rows[0]
    assert abs(r["bias"]) <= 4 * r["mean_se"]


def test_realistic_is_deterministic_across_workers():
    cfg = DgpConfig(n=50, alpha=0.1, seed=8)
    a = realistic_sim(cfg, K=700)
    b = realistic_sim(cfg, K=700, workers=3)
    assert a.rows == b.rows


def test_few_replicates_warn():
    with pytest.warns(UserWarning, match="unstable"):
        sim = realistic_sim(DgpConfig(n=30, alpha=0.1, seed=1), K=50)
    assert sim.low_replicates


def test_population_untouched_by_replicates():
    cfg = DgpConfig(n=40, alpha=0.1, seed=2)
    pop = generate_population(cfg)
    before = pop.y1.copy()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        realistic_sim((pop, cre(40, 20)), K=300, seed=1)
    np.testing.assert_array_equal(pop.y1, before)
    assert not pop.y1.flags.writeable


@settings(max_examples=10, deadline=None)
@given(st.integers(20, 60), st.floats(0.05, 0.4), st.integers(0, 1000))
def test_generated_populations_are_valid(n, alpha, seed):
    pop = generate_population(DgpConfig(n=n, alpha=alpha, seed=seed, N=200))
    assert pop.n == n and pop.p == math.ceil(n * alpha - 1e-12)
    assert np.all(np.isfinite(pop.y1))
