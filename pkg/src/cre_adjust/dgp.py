"""Synthetic finite populations: t3 covariates with AR(1)-type correlation,
linear or nonlinear signal, and heavy-tailed or worst-case residuals."""
import math
from dataclasses import asdict, dataclass

import numpy as np

from .design import center_design, pinv
from .errors import UsageError
from .population import FixedPopulation
from .rng import stream

OUTCOME_MODELS = ("linear", "nonlinear")
ERROR_KINDS = ("t3", "worst-case")
HAT_LEVELS = ("sample", "pool")


@dataclass(frozen=True)
class DgpConfig:
    n: int = 100
    alpha: float = 0.2
    outcome_model: str = "linear"
    error_kind: str = "t3"
    gamma: float = 1.0
    pi1: float = 0.5
    N: int = 5000
    cov_decay: float = 0.1
    seed: int = 2024
    worst_case_hat: str = "sample"

    def __post_init__(self):
        if not 0 <= self.alpha < 1:
            raise UsageError(f"alpha must lie in [0, 1), got {self.alpha}")
        if not self.gamma > 0:
            raise UsageError("gamma must be positive")
        if not 2 <= self.n <= self.N:
            raise UsageError(f"need 2 <= n <= N, got n={self.n}, N={self.N}")
        if not 0 < self.pi1 < 1:
            raise UsageError("pi1 must lie in (0, 1)")
        if not 0 <= self.cov_decay < 1:
            raise UsageError("cov_decay must lie in [0, 1)")
        if self.outcome_model not in OUTCOME_MODELS:
            raise UsageError(f"outcome_model must be one of {OUTCOME_MODELS}")
        if self.error_kind not in ERROR_KINDS:
            raise UsageError(f"error_kind must be one of {ERROR_KINDS}")
        if self.worst_case_hat not in HAT_LEVELS:
            raise UsageError(f"worst_case_hat must be one of {HAT_LEVELS}")
        if self.p >= self.n:
            raise UsageError(f"p = ceil(n * alpha) = {self.p} must be below n = {self.n}")

    @property
    def p(self):
        return math.ceil(self.n * self.alpha - 1e-12)

    def as_dict(self):
        return asdict(self)


def covariate_rows(seed, rows, p, decay=0.1):
    """Rows of the master covariate matrix, each an independent t3 vector.

    Row i comes from its own stream: a chi-square(3) draw, then p standard
    normals turned into a stationary AR(1) sequence so that
    cov(x_k, x_l) = decay^|k-l|. Because each coordinate only depends on the
    normals before it, the first p columns are the same whatever p is asked
    for, which keeps populations nested across (n, p).
    """
    out = np.empty((len(rows), p))
    innov = math.sqrt(1 - decay**2)
    for r, i in enumerate(rows):
        gen = stream(seed, "dgp_row", int(i))
        scale = math.sqrt(gen.chisquare(3) / 3)
        z = gen.standard_normal(p)
        x = np.empty(p)
        prev = 0.0
        for k in range(p):
            prev = z[k] if k == 0 else decay * prev + innov * z[k]
            x[k] = prev
        out[r] = x / scale
    return out


def coefficients(p):
    j = np.arange(1, p + 1)
    return (-1.0) ** j / np.sqrt(j)


def signal(X, model):
    u = X @ coefficients(X.shape[1])
    if model == "linear":
        return u
    return np.sign(u) * np.sqrt(np.abs(u)) + np.sin(u)


def scale_vector(a):
    a = np.asarray(a, dtype=float) - np.mean(a)
    norm = math.sqrt(float(a @ a))
    if norm == 0:
        raise UsageError("cannot scale a constant vector")
    return a / norm


def _worst_case_direction(X):
    """(I - H) diag(H) for the hat matrix of X, without forming H."""
    cd = center_design(X)
    if cd.p == 0:
        return np.zeros(cd.n)
    S = pinv(cd.SigmaHat)
    lev = np.einsum("ij,jk,ik->i", cd.Xc, S, cd.Xc)
    return lev - cd.Xc @ (S @ (cd.Xc.T @ lev))


def _vn(v):
    return float(np.var(v, ddof=1))


def error_vector(cfg, X_signal):
    n = cfg.n
    if cfg.error_kind == "t3":
        return stream(cfg.seed, "dgp_error").standard_t(3, size=cfg.N)[:n]
    if cfg.worst_case_hat == "sample":
        return scale_vector(_worst_case_direction(X_signal))
    pool = covariate_rows(cfg.seed, range(cfg.N), cfg.p, cfg.cov_decay)
    return scale_vector(_worst_case_direction(pool))[:n]


def generate_population(cfg):
    """Finite population (X, y(1)) with y = 1 + f(x) + scaled error.

    The error is rescaled so V_n(error part) = V_n(f) / gamma. With alpha = 0
    the covariate matrix is empty, and the signal still uses the first
    master column so that the outcome is not constant.
    """
    p = cfg.p
    X_full = covariate_rows(cfg.seed, range(cfg.n), max(p, 1), cfg.cov_decay)
    X = X_full[:, :p]
    f = signal(X_full, cfg.outcome_model)
    eps = error_vector(cfg, X if p else X_full)
    ve, vf = _vn(eps), _vn(f)
    noise = eps * math.sqrt(vf / ve) / math.sqrt(cfg.gamma) if ve > 0 else np.zeros_like(f)
    return FixedPopulation(X, 1.0 + f + noise)
