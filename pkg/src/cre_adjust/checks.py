"""Closed-form moments against exhaustive enumeration on random populations."""
import numpy as np

from . import moments
from .errors import UsageError
from .estimators import EstimatorKind
from .oracle import estimator_functional, exact_moments
from .population import FixedPopulation
from .randomization import DEFAULT_ENUM_CAP, count_assignments, cre
from .rng import stream

CHECK_TOLERANCE = 1e-8
FORMULAS = ("unadj_mean", "var_unadj", "bias_adj2", "exact_var_adj2", "bias_db",
            "adj3_mean", "var_adj3")


def random_population(n, p, seed, rep):
    gen = stream(seed, "enum_check", rep)
    X = gen.standard_normal((n, p))
    y = 1.0 + X @ gen.standard_normal(p) + gen.standard_normal(n) if p else 1.0 + gen.standard_normal(n)
    return FixedPopulation(X, y)


def _rel(closed, enumerated, scale):
    # relative to the enumerated value, with a floor so near-zero biases are not blown up
    return abs(closed - enumerated) / max(abs(enumerated), 1e-9 * scale)


def compare_population(pop, d, cap=DEFAULT_ENUM_CAP, workers=1):
    """{formula: relative discrepancy} for one population."""
    n = pop.n
    tau = pop.taubar
    scale = 1.0 + abs(tau)
    ex = {k: exact_moments(estimator_functional(k, d), pop, d, cap=cap, workers=workers)
          for k in (EstimatorKind.UNADJ, EstimatorKind.ADJ2, EstimatorKind.DB, EstimatorKind.ADJ3)}
    out = {
        "unadj_mean": _rel(tau, ex[EstimatorKind.UNADJ].mean, scale),
        "var_unadj": _rel(moments.var_unadj(pop, d), ex[EstimatorKind.UNADJ].variance, scale),
        "bias_adj2": _rel(moments.bias_adj2(pop, d), ex[EstimatorKind.ADJ2].mean - tau, scale),
        "adj3_mean": _rel(tau, ex[EstimatorKind.ADJ3].mean, scale),
    }
    if n >= 3:
        out["bias_db"] = _rel(moments.bias_db(pop, d), ex[EstimatorKind.DB].mean - tau, scale)
    if n >= 5:
        out["exact_var_adj2"] = _rel(moments.exact_var_adj2(pop, d).variance,
                                     ex[EstimatorKind.ADJ2].variance, scale)
        out["var_adj3"] = _rel(moments.moments_adj3(pop, d).variance,
                               ex[EstimatorKind.ADJ3].variance, scale)
    return out


def enum_check(n, n1, p, seed, reps, cap=DEFAULT_ENUM_CAP, workers=1):
    """Max relative discrepancy per formula over `reps` random populations.

    Formulas that need a larger n than given are left out of the result.
    """
    d = cre(n, n1)
    if p >= n - 1:
        raise UsageError(f"need p < n - 1, got p={p}, n={n}")
    if count_assignments(d) > cap:
        raise UsageError(f"C({n},{n1}) exceeds the enumeration cap {cap}")
    worst = {}
    for rep in range(int(reps)):
        for k, v in compare_population(random_population(n, p, seed, rep), d, cap, workers).items():
            worst[k] = max(worst.get(k, 0.0), v)
    return {k: worst[k] for k in FORMULAS if k in worst}


def check_passed(worst, tol=CHECK_TOLERANCE):
    return all(np.isfinite(v) and v <= tol for v in worst.values())
