"""Plug-in variance estimators and Wald intervals."""
from dataclasses import dataclass
from enum import Enum
from statistics import NormalDist

import numpy as np

from .errors import InputError, UsageError
from .estimators import EstimatorKind, parse_kind
from .randomization import cre_product_moment


class VarEstKind(str, Enum):
    UNBIASED = "unbiased"
    CONSERVATIVE = "conservative"


def parse_varest(name):
    if isinstance(name, VarEstKind):
        return name
    try:
        return VarEstKind(str(name).strip().lower())
    except ValueError:
        raise InputError(f"unknown variance estimator {name!r}; use unbiased or conservative") from None


@dataclass(frozen=True)
class AuxMatrices:
    P: np.ndarray
    M: np.ndarray
    B: np.ndarray


def aux_matrices(hat):
    H = np.asarray(hat.H if hasattr(hat, "H") else hat)
    n = H.shape[0]
    P = np.eye(n) - 1.0 / n
    M = P - H + P * np.diag(H)[None, :]  # P diag(H) scales the columns of P
    return AuxMatrices(P, M, M.T @ M)


def _batch(T, y):
    T = np.asarray(T, dtype=float)
    if T.ndim == 1:
        T = T[None, :]
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = np.broadcast_to(y, T.shape)
    return T, y


def batch_nu_hat(kind, T, y, H, pi1, B=None):
    """Variance estimates for a batch of assignments.

    y may be a single outcome vector or one row per assignment (used when the
    outcome is centred at each assignment's own unadjusted estimate).
    """
    kind = parse_varest(kind)
    T, y = _batch(T, y)
    n = T.shape[1]
    odds = (1 - pi1) / pi1
    h = np.diag(H)
    w = T * y / pi1
    wy = T * y * y / pi1  # t_i y_i^2 / pi1
    H2 = H * H
    nu2 = odds**2 / n**2 * (wy @ (h * (1 - h)) + np.einsum("ki,ij,kj->k", w, H2, w) - (w * w) @ (h * h))
    if kind is VarEstKind.UNBIASED:
        if B is None:
            B = aux_matrices(H).B
        b = np.diag(B)
        nu1 = odds / (n * (n - 1)) * (wy @ b + np.einsum("ki,ij,kj->k", w, B, w) - (w * w) @ b)
    else:
        center = (w @ (1 + h)) / n
        resid = y - (w @ H - h * w) - center[:, None]
        nu1 = odds / (n * (n - 1)) * np.sum(T / pi1 * resid**2, axis=1)
    return nu1 + nu2


def batch_unadj_variance(T, y, pi1):
    """(pi0/pi1)(1/n) times the treated-arm sample variance."""
    T, y = _batch(T, y)
    n = T.shape[1]
    n1 = T.sum(axis=1)
    if np.any(n1 < 2):
        raise UsageError("need at least two treated units for a variance estimate")
    mean = np.sum(T * y, axis=1) / n1
    s2 = np.sum(T * (y - mean[:, None]) ** 2, axis=1) / (n1 - 1)
    return (1 - pi1) / pi1 / n * s2


def batch_variance_for(estimator, varest, T, y, H, pi1, B=None):
    """Variance estimate matched to an estimator.

    Adj2 and Adj3 share the plug-in; the outcome-centred estimators use the
    same plug-in on y minus the assignment's own unadjusted estimate.
    """
    kind = parse_kind(estimator)
    T, y = _batch(T, y)
    if kind is EstimatorKind.UNADJ:
        return batch_unadj_variance(T, y, pi1)
    if kind in (EstimatorKind.ADJ2, EstimatorKind.ADJ3):
        return batch_nu_hat(varest, T, y, H, pi1, B)
    if kind in (EstimatorKind.DB, EstimatorKind.ADJ2_DAGGER):
        unadj = np.sum(T * y, axis=1) / (T.shape[1] * pi1)
        return batch_nu_hat(varest, T, y - unadj[:, None], H, pi1, B)
    raise UsageError(f"no variance estimator for {kind.value}")


def nu_hat(kind, data, hat=None):
    hat = data.hat() if hat is None else hat
    return float(batch_nu_hat(kind, data.t, data.y, hat.H, data.design.pi1)[0])


# -- exact expectations under complete randomization ---------------------------

def expected_nu_hat(kind, pop, d):
    """E[nu_hat] computed term by term from E[t_1...t_k]."""
    kind = parse_varest(kind)
    n, pi1, odds = pop.n, d.pi1, d.odds
    y, H, h = pop.y1, pop.hat.H, pop.hat.diag
    m1, m2, m3 = (cre_product_moment(d, k) for k in (1, 2, 3))
    H2 = H * H
    off2 = float(y @ H2 @ y) - float(np.sum(h**2 * y**2))
    nu2 = odds**2 / n**2 * (float(np.sum(h * (1 - h) * y**2)) * m1 / pi1 + off2 * m2 / pi1**2)
    if kind is VarEstKind.UNBIASED:
        B = aux_matrices(H).B
        b = np.diag(B)
        off_b = float(y @ B @ y) - float(np.sum(b * y**2))
        nu1 = odds / (n * (n - 1)) * (float(np.sum(b * y**2)) * m1 / pi1 + off_b * m2 / pi1**2)
        return nu1 + nu2
    G = H.copy()
    np.fill_diagonal(G, 0.0)
    G = G + (1 + h)[None, :] / n
    U = G * y[None, :]
    dg = np.diag(U).copy()
    s = U.sum(axis=1) - dg
    q = np.sum(U * U, axis=1) - dg**2
    per_unit = (y**2 * m1
                - 2 * y * (dg * m1 + s * m2) / pi1
                + (dg**2 * m1 + 2 * dg * s * m2 + q * m2 + (s**2 - q) * m3) / pi1**2)
    nu1 = odds / (n * (n - 1)) / pi1 * float(np.sum(per_unit))
    return nu1 + nu2


def conservative_leading_gap(pop, d):
    """Leading part of E[conservative] - E[unbiased]; non-negative by construction."""
    H, y = pop.hat.H, pop.y1
    H2 = H * H
    off = float(np.sum(H2 @ (y**2))) - float(np.sum(np.diag(H2) * y**2))
    return d.odds**2 / pop.n**2 * off


# -- intervals -----------------------------------------------------------------

@dataclass(frozen=True)
class IntervalReport:
    point: float
    se: float
    ci_lower: float
    ci_upper: float
    level: float = 0.95
    clamped: bool = False


def normal_quantile(level):
    if not 0 < level < 1:
        raise UsageError("level must lie in (0, 1)")
    return NormalDist().inv_cdf(0.5 + level / 2)


def wald_ci(point, nu, n=None, level=0.95):
    """Normal interval point +/- z * sqrt(nu).

    nu is the variance of the estimator itself (already on the 1/n scale),
    so sqrt(sigma_n^2 / n) = sqrt(nu). n is accepted for symmetry with the
    sigma_n^2 convention but is not needed.
    """
    z = normal_quantile(level)
    clamped = bool(nu < 0)
    se = float(np.sqrt(max(nu, 0.0)))
    return IntervalReport(float(point), se, point - z * se, point + z * se, level, clamped)
