"""Quadratic-form view of the three variances and the search for outcome
vectors on which the second-order estimator beats both competitors.

For a fixed design every variance here is a quadratic form in the outcome
vector v:

    var_unadj(v) = v'Q0v,   nu_f_dagger(v) = v'Q1v,   nu_f(v) = v'Q2v.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import UsageError
from .rng import stream


@dataclass(frozen=True)
class QuadraticForms:
    Q0: np.ndarray
    Q1: np.ndarray
    Q11: np.ndarray
    Q12: np.ndarray
    Q2: np.ndarray
    Q21: np.ndarray
    Q22: np.ndarray
    Pc: np.ndarray

    def value(self, name, v):
        return float(v @ getattr(self, name) @ v)

    def gradient(self, name, v):
        return 2.0 * getattr(self, name) @ v


def _symmetrize(A):
    return 0.5 * (A + A.T)


def build_quadratic_forms(hat, d):
    if not d.is_cre:
        raise UsageError("quadratic forms are derived under complete randomization")
    H = np.asarray(hat.H)
    n = H.shape[0]
    h = np.diag(H)
    odds = d.odds
    Pc = np.eye(n) - 1.0 / n
    loo = np.eye(n) - H + np.diag(h)  # v -> leave-one-out residual
    Q0 = odds / (n * (n - 1)) * Pc
    Q21 = _symmetrize(odds / (n * (n - 1)) * loo @ Pc @ loo)
    Q22 = odds**2 / n**2 * (np.diag(h - 2 * h**2) + H * H)
    Q11 = _symmetrize(Pc @ Q21 @ Pc)
    Q12 = _symmetrize(Pc @ Q22 @ Pc)
    return QuadraticForms(Q0, Q11 + Q12, Q11, Q12, Q21 + Q22, Q21, Q22, Pc)


def omega_weights(hat, d):
    """Weights with c* ~ 0 roughly when mean(omega * y) ~ mean(y)."""
    H = np.asarray(hat.H)
    n = H.shape[0]
    p = float(np.trace(H))
    if p < 0.5:
        raise UsageError("omega weights divide by p; the design has no covariates")
    h = np.diag(H)
    odds = d.odds
    # sum_j H_ji^2 = h_i because H is a symmetric projection
    return n / p * ((odds + (n - p) / n) * h + (1 - 2 * odds) * h**2 + odds * h - H @ h)


@dataclass(frozen=True)
class CenterResult:
    c_star: float
    degenerate: bool


def optimal_center(pop, d):
    """Minimiser over c of nu_f evaluated at y - c."""
    H, y = pop.hat.H, pop.y1
    n = pop.n
    h = np.diag(H)
    p = float(h.sum())
    odds = d.odds
    kappa = n / (n - 1)
    r = y - H @ y + h * y
    dh = h - p / n
    num = odds * (np.sum(h * (1 - h) * y) + np.sum((h - h**2) * y)) + kappa * np.sum((r - r.mean()) * dh)
    den = odds * (2 * p - 2 * np.sum(h**2)) + kappa * np.sum(dh**2)
    if abs(den) <= 1e-14 * max(1.0, n):
        return CenterResult(float("nan"), True)
    return CenterResult(float(num / den), False)


# -- constrained search --------------------------------------------------------

@dataclass(frozen=True)
class SearchOptions:
    offset_dagger: float = 0.1   # v'(Q2-Q1)v + offset <= 0
    offset_unadj: float = 0.05   # v'(Q2-Q0)v + offset <= 0
    floor_unadj: float = 0.01    # -v'Q0v + floor <= 0
    starts: int = 16
    seed: int = 2024
    start_level: float = 0.02    # initial v'Q0v
    outer_iterations: int = 60
    inner_iterations: int = 500
    penalty: float = 10.0
    penalty_growth: float = 4.0
    feas_tol: float = 1e-6
    workers: int = 1


@dataclass(frozen=True)
class SearchResult:
    v: np.ndarray
    objective: float
    constraint_slacks: tuple
    converged: bool
    iterations: int
    start: int = -1
    feasible_starts: int = 0
    details: dict = field(default_factory=dict)


def _constraints(qf, opts):
    D1 = qf.Q2 - qf.Q1
    D2 = qf.Q2 - qf.Q0
    mats = (D1, D2, -qf.Q0)
    offsets = (opts.offset_dagger, opts.offset_unadj, opts.floor_unadj)
    return mats, offsets


def _slacks(v, mats, offsets):
    return np.array([float(v @ M @ v) + c for M, c in zip(mats, offsets)])


def _polish(v, qf, mats, offsets):
    """Rescale v so the tightest constraint is active.

    Every constraint is a homogeneous quadratic plus a constant, so once the
    direction has q1 < 0, q2 < 0 and q0 > 0 the smallest feasible scale is
    available in closed form and is also where the objective is smallest.
    """
    q = [float(v @ M @ v) for M in mats]
    if not (q[0] < 0 and q[1] < 0 and q[2] < 0):
        return v
    s2 = max(offsets[i] / -q[i] for i in range(3))
    v = v * math.sqrt(s2)
    # guard against rounding leaving a hair of infeasibility
    for _ in range(3):
        worst = _slacks(v, mats, offsets).max()
        if worst <= 0:
            break
        v = v * (1 + 1e-12 + abs(worst))
    return v


def _one_start(qf, opts, k):
    n = qf.Q0.shape[0]
    mats, offsets = _constraints(qf, opts)
    gen = stream(opts.seed, "adversarial_start", k)
    v = gen.standard_normal(n)
    v /= np.linalg.norm(v)
    q0 = float(v @ qf.Q0 @ v)
    v *= math.sqrt(opts.start_level / q0) if q0 > 0 else 1.0
    lam = np.zeros(3)
    rho = opts.penalty
    Q2 = qf.Q2
    prev_viol = np.inf
    it = 0
    for it in range(1, opts.outer_iterations + 1):
        def lagrangian(x):
            g = _slacks(x, mats, offsets)
            mult = np.maximum(0.0, lam + rho * g)
            val = float(x @ Q2 @ x) + float(np.sum(mult**2 - lam**2)) / (2 * rho)
            grad = 2 * Q2 @ x
            for m, M in zip(mult, mats):
                if m > 0:
                    grad = grad + 2 * m * (M @ x)
            return val, grad

        res = minimize(lagrangian, v, jac=True, method="L-BFGS-B",
                       options={"maxiter": opts.inner_iterations, "gtol": 1e-12, "ftol": 1e-15})
        v = res.x
        g = _slacks(v, mats, offsets)
        lam = np.maximum(0.0, lam + rho * g)
        viol = float(np.max(np.maximum(g, 0.0)))
        if viol > 0.25 * prev_viol:
            rho *= opts.penalty_growth
        prev_viol = viol
        if viol <= opts.feas_tol * 1e-2 and it > 2:
            break
    v = _polish(v, qf, mats, offsets)
    g = _slacks(v, mats, offsets)
    return v, g, it


def adversarial_search(hat, d, opts=None):
    """Minimise nu_f subject to beating nu_f_dagger by 0.1 and var_unadj by 0.05.

    Returns the best start by (feasible, objective). A failed search returns
    converged=False rather than raising.
    """
    opts = SearchOptions() if opts is None else opts
    n = hat.H.shape[0]
    if n < round(float(hat.trace)) + 2:
        raise UsageError("adversarial search needs n >= p + 2")
    qf = build_quadratic_forms(hat, d)
    starts = range(opts.starts)
    if opts.workers > 1:
        with ThreadPoolExecutor(opts.workers) as ex:
            runs = list(ex.map(lambda k: _one_start(qf, opts, k), starts))
    else:
        runs = [_one_start(qf, opts, k) for k in starts]
    best = None
    feasible = 0
    for k, (v, g, it) in enumerate(runs):
        ok = bool(np.all(g <= opts.feas_tol))
        feasible += ok
        key = (not ok, qf.value("Q2", v))
        if best is None or key < best[0]:
            best = (key, k, v, g, it, ok)
    _, k, v, g, it, ok = best
    return SearchResult(v, qf.value("Q2", v), tuple(float(x) for x in g), ok, it, k, feasible,
                        {"nu_f": qf.value("Q2", v), "nu_f_dagger": qf.value("Q1", v),
                         "var_unadj": qf.value("Q0", v)})
