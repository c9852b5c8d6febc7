"""Randomization bias and variance formulas at a fixed population.

Two independent exact routes are provided for the second-order estimator:

* `exact_var_adj2` sums pattern covariances weighted by H/y statistics
  (the V1..V7 / U1..U3 bookkeeping);
* `polynomial_moments` treats the estimator as a + t'Bt in the indicator
  vector and takes exact moments of that polynomial directly.

The enumeration oracle checks both.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError
from .randomization import covariance_scalars, cre_product_moment


@dataclass(frozen=True)
class MomentReport:
    estimator: str
    bias: float
    variance: float
    variance_kind: str  # "exact" or "main-term"
    components: dict = field(default_factory=dict)


def _vn(v):
    v = np.asarray(v, dtype=float)
    return float(np.sum((v - v.mean()) ** 2) / (v.size - 1))


def _need_cre(d):
    if not d.is_cre:
        raise UsageError("this formula is derived under complete randomization")


def var_unadj(pop, d):
    _need_cre(d)
    return d.odds / pop.n * _vn(pop.y1)


def bias_adj2(pop, d):
    if not d.is_cre:
        return 0.0
    n = pop.n
    return -d.odds / (n * (n - 1)) * float(pop.hat.diag @ pop.y1)


def bias_adj2_offdiagonal_form(pop, d):
    """Same bias written through the off-diagonal entries of H."""
    _need_cre(d)
    n, H, y = pop.n, pop.hat.H, pop.y1
    off = float(np.sum(H @ y) - pop.hat.diag @ y)
    return d.odds / (n * (n - 1)) * off


def loo_residual(H, y):
    """y_i - sum_{j != i} H_ji y_j."""
    return y - H @ y + np.diag(H) * y


def _nu_parts(H, y, d):
    n = y.size
    h = np.diag(H)
    nu1 = d.odds / n * _vn(loo_residual(H, y))
    quad = float(y @ ((H * H) @ y)) - float(np.sum(h**2 * y**2)) + float(np.sum(h * (1 - h) * y**2))
    nu2 = d.odds**2 / n**2 * quad
    return nu1, nu2


def nu_f(pop, d):
    """Main-term variance of the second-order estimator."""
    _need_cre(d)
    nu1, nu2 = _nu_parts(pop.hat.H, pop.y1, d)
    return MomentReport("adj2", bias_adj2(pop, d), nu1 + nu2, "main-term", {"nu1": nu1, "nu2": nu2})


def nu_f_centered(pop, d, c):
    """Main-term variance with the outcome shifted by a constant c."""
    _need_cre(d)
    nu1, nu2 = _nu_parts(pop.hat.H, pop.y1 - c, d)
    return nu1 + nu2


def nu_f_dagger(pop, d):
    """Main-term variance of the outcome-centred (error-free) estimator."""
    _need_cre(d)
    nu1, nu2 = _nu_parts(pop.hat.H, pop.y1 - pop.taubar, d)
    return MomentReport("adj2_dagger", bias_db(pop, d), nu1 + nu2, "main-term", {"nu1": nu1, "nu2": nu2})


def _h_statistics(pop):
    H, y, h = pop.hat.H, pop.y1, pop.hat.diag
    Hy = H @ y
    tr1, tr2 = pop.trace_terms()
    s = {
        "tr1": tr1,
        "tr2": tr2,
        "h_y2": float(np.sum(h * y**2)),
        "h2_y2": float(np.sum(h**2 * y**2)),
        "h_1mh_y2": float(np.sum(h * (1 - h) * y**2)),
        "h_2hm1_y2": float(np.sum(h * (2 * h - 1) * y**2)),
        # sum_{i != j} H_ij y_i y_j
        "off_yy": float(y @ Hy) - float(np.sum(h * y**2)),
        # sum_{i != j} H_ii H_ij y_i y_j
        "off_hyy": float(np.sum(h * y * Hy)) - float(np.sum(h**2 * y**2)),
    }
    return s


def variance_statistics(pop, d):
    """The V1..V7 and U1..U3 weights, each already scaled by 1 / (pi1^2 n^2)."""
    n, pi1 = pop.n, d.pi1
    s = _h_statistics(pop)
    k = 1.0 / (pi1**2 * n**2)
    V = {
        "var": s["h_1mh_y2"],
        "swap": s["tr2"] - s["h2_y2"],
        "share_first": s["off_yy"] - 2 * s["off_hyy"],
        "chain_out": -s["off_hyy"] - s["tr2"] + s["h2_y2"],
        "chain_in": -s["off_hyy"] - s["tr2"] + s["h2_y2"],
        "share_second": s["h_2hm1_y2"],
        "disjoint": 4 * s["off_hyy"] - s["off_yy"] + s["tr1"] ** 2 + s["tr2"] - 2 * s["h2_y2"],
    }
    U = {
        "u_other": -pop.taubar * n * s["tr1"] + s["h_y2"] - s["off_yy"],
        "u_first": s["off_yy"],
        "u_second": -s["h_y2"],
    }
    return {key: k * v for key, v in V.items()}, {key: k * v for key, v in U.items()}


def _exact_adj2_parts(pop, d):
    _need_cre(d)
    if pop.n < 5:
        raise UsageError("exact variance formulas need n >= 5")
    c = covariance_scalars(d)
    V, U = variance_statistics(pop, d)
    var_if = sum(V[k] * c[k] for k in V)
    cov_unadj_if = sum(U[k] * c[k] for k in U)
    vu = var_unadj(pop, d)
    return vu, var_if, cov_unadj_if, c


def exact_var_adj2(pop, d):
    vu, var_if, cov, _ = _exact_adj2_parts(pop, d)
    total = vu + var_if - 2 * cov
    return MomentReport("adj2", bias_adj2(pop, d), total, "exact",
                        {"var_unadj": vu, "var_if": var_if, "cov_unadj_if": cov})


def bias_db(pop, d):
    _need_cre(d)
    n = pop.n
    if n < 3:
        raise UsageError("bias of the debiased estimator needs n >= 3")
    p = pop.hat.trace
    off = float(np.sum(pop.hat.H @ pop.y1) - pop.hat.diag @ pop.y1)  # sum_{i != j} H_ij y_j
    return 2 * d.pi0 / d.pi1**2 * (d.n1 - 1) / (n - 1) / (n - 2) * (p / n * pop.taubar + off / n)


def bias_db_second_form(pop, d):
    _need_cre(d)
    n = pop.n
    p = pop.hat.trace
    lev = float(pop.hat.diag @ pop.y1)
    return 2 * d.odds * (1 - d.odds / (n - 1)) / (n - 2) * (p / n * pop.taubar - lev / n)


def adj3_corrections(pop, d):
    """Variance of the extra Adj3 term and its covariances with Unadj and the IF term."""
    _need_cre(d)
    n, pi1, odds = pop.n, d.pi1, d.odds
    y, h, H = pop.y1, pop.hat.diag, pop.hat.H
    tr1, _ = pop.trace_terms()
    var_alpha = odds**3 / (n * (n - 1) ** 3) * (float(np.sum(h**2 * y**2)) - tr1**2 / n)
    cov_unadj_alpha = odds**2 / (n * (n - 1) ** 2) * float(np.sum(h * y * (y - pop.taubar)))
    g = h * y
    G = float(g.sum())
    h2y2 = float(np.sum(h**2 * y**2))
    g_first = float(g @ (H @ y)) - h2y2      # sum_{i != j} H_ij y_j g_i
    g_second = -h2y2                         # sum_{i != j} H_ij y_j g_j
    g_other = -G * tr1 - g_first - g_second  # sum over three distinct units
    c = covariance_scalars(d)
    scale = odds / (n * (n - 1)) / (n * pi1**2)
    cov_if_alpha = scale * (g_other * c["u_other"] + g_first * c["u_first"] + g_second * c["u_second"])
    return {"var_alpha": var_alpha, "cov_unadj_alpha": cov_unadj_alpha, "cov_if_alpha": cov_if_alpha}


def moments_adj3(pop, d):
    base = exact_var_adj2(pop, d)
    corr = adj3_corrections(pop, d)
    total = (base.variance + corr["var_alpha"] + 2 * corr["cov_unadj_alpha"]
             - 2 * corr["cov_if_alpha"])
    return MomentReport("adj3", 0.0, total, "exact", {**base.components, **corr})


def efficiency_criterion(pop, d):
    """Does the second-order estimator beat Unadj to first order? lhs >= rhs means yes."""
    rep = nu_f(pop, d)
    lhs = var_unadj(pop, d) - rep.components["nu1"]
    rhs = rep.components["nu2"]
    return {"improves": bool(lhs >= rhs), "lhs": lhs, "rhs": rhs}


# -- exact moments of a + t'Bt -------------------------------------------------

def polynomial_moments(a, B, d):
    """Exact mean and variance of a.t + t'Bt for symmetric, zero-diagonal B."""
    a = np.asarray(a, dtype=float)
    B = np.asarray(B, dtype=float)
    m1, m2, m3, m4 = (cre_product_moment(d, k) for k in (1, 2, 3, 4))
    A = a.sum()
    total_b = B.sum()
    r = B.sum(axis=1)
    sum_r2 = float(r @ r)
    Q = float(np.sum(B * B))
    a2 = float(a @ a)
    ar = float(a @ r)
    mean = m1 * A + m2 * total_b
    e_lin2 = m1 * a2 + m2 * (A * A - a2)
    e_cross = 2 * ar * m2 + (A * total_b - 2 * ar) * m3
    e_quad2 = 2 * Q * m2 + (4 * sum_r2 - 4 * Q) * m3 + (total_b**2 - 4 * sum_r2 + 2 * Q) * m4
    second = e_lin2 + 2 * e_cross + e_quad2
    return float(mean), float(second - mean * mean)


def adj2_polynomial(pop, d, with_alpha=False):
    """Coefficients (a, B) with Adj2 (or Adj3) = a.t + t'Bt."""
    n, pi1 = pop.n, d.pi1
    y, H, h = pop.y1, pop.hat.H, pop.hat.diag
    a = y * (1 - h) / (n * pi1)
    if with_alpha:
        a = a + d.odds / (n * (n - 1)) * h * y / pi1
    B = -H * (y[:, None] + y[None, :]) / (2 * n * pi1**2)
    np.fill_diagonal(B, 0.0)
    return a, B
