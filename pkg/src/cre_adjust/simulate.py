"""Formula-only (oracle) and Monte Carlo (realistic) simulation drivers."""
import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import moments
from .dgp import DgpConfig, generate_population
from .errors import UsageError
from .estimators import EstimatorKind, batch_estimates, parse_kind
from .randomization import cre_from_ratio, sample_assignments
from .rng import stream
from .varest import VarEstKind, aux_matrices, batch_variance_for, normal_quantile, parse_varest

ORACLE_COLUMNS = ("n", "alpha", "p", "outcome_model", "error_kind", "gamma", "pi1",
                  "estimator", "variance_kind", "relative_efficiency", "cov2")


def coefficient_of_variation_sq(pop):
    """V_n(y1) / taubar^2, or inf when taubar is zero."""
    tau = pop.taubar
    v = float(np.var(pop.y1, ddof=1))
    return math.inf if tau == 0 else v / tau**2


def oracle_rows(cfg):
    """Relative efficiencies (variance / var_unadj) for one configuration."""
    pop = generate_population(cfg)
    d = cre_from_ratio(cfg.n, cfg.pi1)
    base = moments.var_unadj(pop, d)
    dagger = moments.nu_f_dagger(pop, d).variance
    entries = [
        ("unadj", "exact", base),
        ("adj2", "exact", moments.exact_var_adj2(pop, d).variance),
        ("adj2", "main-term", moments.nu_f(pop, d).variance),
        ("adj2_dagger", "main-term", dagger),
        ("db", "main-term", dagger),
        ("adj3", "exact", moments.moments_adj3(pop, d).variance),
    ]
    cov2 = coefficient_of_variation_sq(pop)
    key = (cfg.n, cfg.alpha, cfg.p, cfg.outcome_model, cfg.error_kind, cfg.gamma, d.pi1)
    return [dict(zip(ORACLE_COLUMNS, key + (est, kind, value / base, cov2)))
            for est, kind, value in entries]


@dataclass(frozen=True)
class OracleGrid:
    n: tuple = (50, 100, 500, 1000)
    alpha: tuple = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)
    outcome_model: tuple = ("linear", "nonlinear")
    error_kind: tuple = ("t3", "worst-case")
    gamma: tuple = (1.0,)
    pi1: tuple = (0.5,)
    N: int = 5000
    seed: int = 2024

    def configs(self):
        for n, a, m, e, g, p in itertools.product(self.n, self.alpha, self.outcome_model,
                                                  self.error_kind, self.gamma, self.pi1):
            yield DgpConfig(n=n, alpha=a, outcome_model=m, error_kind=e, gamma=g, pi1=p,
                            N=self.N, seed=self.seed)


def oracle_sim(grid, workers=1):
    """Rows in grid order; workers only change wall time, not the output."""
    configs = list(grid.configs()) if isinstance(grid, OracleGrid) else list(grid)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(oracle_rows, configs))
    else:
        parts = [oracle_rows(c) for c in configs]
    return [row for part in parts for row in part]


# -- realistic Monte Carlo -----------------------------------------------------

METRIC_COLUMNS = ("estimator", "varest", "rel_abs_bias", "rmse", "coverage", "ci_length",
                  "sd_inflation_ratio", "bias", "mc_variance", "mean_se")
DEFAULT_SIM_ESTIMATORS = ("unadj", "adj2", "db", "adj3")
BLOCK = 250


@dataclass(frozen=True)
class SimMetrics:
    rows: list
    K: int
    taubar: float
    low_replicates: bool = False
    config: dict = field(default_factory=dict)

    def get(self, estimator, varest, metric):
        for r in self.rows:
            if r["estimator"] == estimator and r["varest"] == varest:
                return r[metric]
        raise KeyError((estimator, varest))


def theoretical_variance(kind, pop, d):
    """Benchmark variance used to normalise the bias."""
    kind = parse_kind(kind)
    if kind is EstimatorKind.UNADJ:
        return moments.var_unadj(pop, d)
    if kind is EstimatorKind.ADJ2:
        return moments.exact_var_adj2(pop, d).variance
    if kind is EstimatorKind.ADJ3:
        return moments.moments_adj3(pop, d).variance
    if kind in (EstimatorKind.DB, EstimatorKind.ADJ2_DAGGER):
        return moments.nu_f_dagger(pop, d).variance
    return moments.nu_f(pop, d).variance


def _block(pop, d, kinds, vkinds, seed, b, size, B):
    T = sample_assignments(d, stream(seed, "realistic_sim", b), size)
    H, y = pop.hat.H, pop.y1
    est = {k: batch_estimates(k, T, y, H, d.pi1) for k in kinds}
    var = {(k, v): batch_variance_for(k, v, T, y, H, d.pi1, B) for k in kinds for v in vkinds}
    return est, var


def realistic_sim(cfg, K=20000, estimators=DEFAULT_SIM_ESTIMATORS,
                  var_estimators=("unbiased", "conservative"), seed=None, workers=1, level=0.95):
    """Repeated CRE assignments on one fixed population.

    Replicates are drawn in fixed blocks of BLOCK, block b from its own derived
    stream, so the output does not depend on the worker count.
    """
    if isinstance(cfg, DgpConfig):
        pop = generate_population(cfg)
        d = cre_from_ratio(cfg.n, cfg.pi1)
        seed = cfg.seed if seed is None else seed
        config = cfg.as_dict()
    else:
        pop, d = cfg
        config = {}
        if seed is None:
            raise UsageError("seed is required when passing a population directly")
    K = int(K)
    if K < 2:
        raise UsageError("need K >= 2 replicates")
    low = K < 100
    if low:
        warnings.warn(f"K={K} < 100 replicates; coverage estimates are unstable", stacklevel=2)
    kinds = [parse_kind(k) for k in estimators]
    vkinds = [parse_varest(v) for v in var_estimators]
    B = aux_matrices(pop.hat).B if VarEstKind.UNBIASED in vkinds else None
    sizes = [(b, min(BLOCK, K - s)) for b, s in enumerate(range(0, K, BLOCK))]

    def run(bs):
        return _block(pop, d, kinds, vkinds, seed, bs[0], bs[1], B)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, sizes))
    else:
        parts = [run(bs) for bs in sizes]
    z = normal_quantile(level)
    tau = pop.taubar
    rows = []
    for k in kinds:
        est = np.concatenate([p[0][k] for p in parts])
        err = est - tau
        mean = float(est.mean())
        mc_var = float(est.var())
        sd = float(est.std(ddof=1))
        theo = theoretical_variance(k, pop, d)
        for v in vkinds:
            nu = np.concatenate([p[1][(k, v)] for p in parts])
            se = np.sqrt(np.maximum(nu, 0.0))
            covered = np.abs(err) <= z * se
            rows.append({
                "estimator": k.value,
                "varest": v.value,
                "rel_abs_bias": abs(mean - tau) / math.sqrt(theo),
                "rmse": float(np.sqrt(np.mean(err**2))),
                "coverage": float(np.mean(covered)),
                "ci_length": float(np.mean(2 * z * se)),
                "sd_inflation_ratio": float(np.mean(se)) / sd if sd > 0 else math.nan,
                "bias": mean - tau,
                "mc_variance": mc_var,
                "mean_se": sd / math.sqrt(K),
            })
    return SimMetrics(rows, K, tau, low, config)


def sim_config_from_dict(doc):
    """DgpConfig plus run options from a parsed JSON document."""
    doc = dict(doc)
    run = {k: doc.pop(k) for k in ("K", "estimators", "var_estimators", "level") if k in doc}
    return replace(DgpConfig(), **doc), run
