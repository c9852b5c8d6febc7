"""Point estimators of the treated-arm mean.

Every estimator is written against a batch of assignments (K x n) so the
enumeration and Monte Carlo code can evaluate thousands of assignments in one
call. The scalar entry point `estimate` wraps the batch versions.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .design import as_covariates, hat_from_covariates, pinv
from .errors import DegenerateDesignError, InputError


class EstimatorKind(str, Enum):
    UNADJ = "unadj"
    ADJ = "adj"
    ADJ1 = "adj1"
    ADJ2 = "adj2"
    ADJ2_DAGGER = "adj2_dagger"
    DB = "db"
    ADJ3 = "adj3"


ALL_KINDS = tuple(EstimatorKind)


def parse_kind(name):
    if isinstance(name, EstimatorKind):
        return name
    try:
        return EstimatorKind(str(name).strip().lower().replace("-", "_"))
    except ValueError:
        known = ", ".join(k.value for k in EstimatorKind)
        raise InputError(f"unknown estimator {name!r}; known: {known}") from None


@dataclass(frozen=True)
class ObservedDataset:
    X: np.ndarray
    t: np.ndarray
    y: np.ndarray
    design: object

    def __post_init__(self):
        X = as_covariates(self.X) if np.asarray(self.X).size else np.zeros((len(self.y), 0))
        t = np.asarray(self.t)
        y = np.asarray(self.y, dtype=float)
        n = X.shape[0]
        if t.shape != (n,) or y.shape != (n,):
            raise InputError("X, t and y disagree on the number of units")
        if not np.all((t == 0) | (t == 1)):
            raise InputError("assignment must be 0/1")
        if not np.all(np.isfinite(y)):
            raise InputError("outcomes must be finite")
        if self.design.n != n:
            raise InputError("design size does not match the data")
        if self.design.is_cre and int(t.sum()) != self.design.n1:
            raise InputError(f"CRE design expects {self.design.n1} treated units, data has {int(t.sum())}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "t", t.astype(np.int8))
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.X.shape[0]

    def hat(self):
        return hat_from_covariates(self.X)


def _as_batch(T):
    T = np.asarray(T, dtype=float)
    return T[None, :] if T.ndim == 1 else T


def _pieces(T, y, H, pi1):
    T = _as_batch(T)
    n = T.shape[1]
    if np.any(T.sum(axis=1) == 0):
        raise DegenerateDesignError("an assignment has no treated units")
    w = T * y / pi1  # t_j y_j / pi1
    unadj = w.sum(axis=1) / n
    return T, n, w, unadj


def batch_unadj(T, y, pi1):
    T = _as_batch(T)
    if np.any(T.sum(axis=1) == 0):
        raise DegenerateDesignError("an assignment has no treated units")
    return T @ y / (T.shape[1] * pi1)


def batch_if22(T, y, H, pi1):
    """Second-order influence-function term, off-diagonal pairs only."""
    T, n, w, _ = _pieces(T, y, H, pi1)
    h = np.diag(H)
    lead = T / pi1 - 1
    return np.einsum("ki,ki->k", lead, w @ H - h * w) / n


def batch_estimates(kind, T, y, H, pi1):
    kind = parse_kind(kind)
    T, n, w, unadj = _pieces(T, y, H, pi1)
    if kind is EstimatorKind.UNADJ:
        return unadj
    h = np.diag(H)
    lead = T / pi1 - 1
    odds = (1 - pi1) / pi1
    if kind is EstimatorKind.ADJ1:
        return unadj - np.einsum("ki,ki->k", lead, w @ H) / n
    if kind in (EstimatorKind.ADJ2, EstimatorKind.ADJ3):
        adj2 = unadj - np.einsum("ki,ki->k", lead, w @ H - h * w) / n
        if kind is EstimatorKind.ADJ2:
            return adj2
        return adj2 + odds / (n * (n - 1)) * (w @ h)
    # the remaining three center the outcome at the unadjusted estimate
    e = T * (y[None, :] - unadj[:, None]) / pi1
    if kind is EstimatorKind.ADJ2_DAGGER:
        return unadj - np.einsum("ki,ki->k", lead, e @ H - h * e) / n
    adj = unadj - np.einsum("ki,ki->k", lead, e @ H) / n
    if kind is EstimatorKind.ADJ:
        return adj
    # debiased: adjusted estimate plus the leverage-weighted correction
    return adj + odds / n * (e @ h)


def estimate(kind, data, hat=None):
    hat = data.hat() if hat is None else hat
    return float(batch_estimates(kind, data.t, data.y, hat.H, data.design.pi1)[0])


def estimate_all(data, hat=None, kinds=ALL_KINDS):
    hat = data.hat() if hat is None else hat
    return {parse_kind(k): estimate(k, data, hat) for k in kinds}


@dataclass(frozen=True)
class OlsSlope:
    beta: np.ndarray
    rank_deficient: bool


def ols_slope_centered(data, cd=None):
    """Slope from regressing the centred treated residuals t(y - unadj)/pi1 on centred covariates."""
    from .design import center_design

    cd = center_design(data.X) if cd is None else cd
    pi1 = data.design.pi1
    unadj = float(batch_unadj(data.t, data.y, pi1)[0])
    resid = data.t * (data.y - unadj) / pi1
    beta = pinv(cd.SigmaHat) @ (cd.Xc.T @ resid) if cd.p else np.zeros(0)
    return OlsSlope(beta, cd.rank < cd.p)


def adj_via_slope(data, cd=None):
    """The fully adjusted estimator rebuilt from the OLS slope instead of H."""
    from .design import center_design

    cd = center_design(data.X) if cd is None else cd
    pi1 = data.design.pi1
    unadj = float(batch_unadj(data.t, data.y, pi1)[0])
    if cd.p == 0:
        return unadj
    beta = ols_slope_centered(data, cd).beta
    return unadj - float(np.mean((data.t / pi1 - 1) * (cd.Xc @ beta)))
