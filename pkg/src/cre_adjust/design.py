"""Centering, pseudoinverse and hat-matrix construction for a covariate matrix."""
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

PINV_REL_TOL = 1e-12
SYMMETRY_TOL = 1e-10


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def as_covariates(X):
    """Coerce to an n x p float matrix and check it. p = 0 is allowed."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InputError(f"covariates must be a 2-d array, got shape {X.shape}")
    n, p = X.shape
    if n < 2:
        raise InputError("need at least two units")
    if not np.all(np.isfinite(X)):
        raise InputError("covariate matrix has non-finite entries")
    if p >= n:
        raise InputError(f"need p < n, got p={p}, n={n}")
    return X


@dataclass(frozen=True)
class CenteredDesign:
    Xc: np.ndarray
    xbar: np.ndarray
    SigmaHat: np.ndarray
    rank: int

    @property
    def n(self):
        return self.Xc.shape[0]

    @property
    def p(self):
        return self.Xc.shape[1]


@dataclass(frozen=True)
class HatMatrix:
    H: np.ndarray
    diag: np.ndarray = field(init=False)
    trace: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "H", _frozen(self.H))
        object.__setattr__(self, "diag", _frozen(np.diag(self.H)))
        object.__setattr__(self, "trace", float(np.sum(self.diag)))

    @property
    def n(self):
        return self.H.shape[0]


def _eig_sym(M):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InputError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InputError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if M.size and np.max(np.abs(M - M.T)) > SYMMETRY_TOL * scale:
        raise InputError("matrix is not symmetric")
    w, V = np.linalg.eigh((M + M.T) / 2)
    return w, V


def _kept(w, rel_tol):
    if w.size == 0:
        return np.zeros(0, dtype=bool)
    top = np.max(np.abs(w))
    if top == 0:
        return np.zeros(w.shape, dtype=bool)
    return np.abs(w) > rel_tol * top


def pinv(M, rel_tol=PINV_REL_TOL):
    """Moore-Penrose inverse of a symmetric matrix via eigendecomposition.

    Eigenvalues with |lambda| <= rel_tol * max|lambda| are treated as zero.
    """
    w, V = _eig_sym(M)
    keep = _kept(w, rel_tol)
    Vk = V[:, keep]
    return (Vk / w[keep]) @ Vk.T


def center_design(X):
    X = as_covariates(X)
    xbar = X.mean(axis=0)
    Xc = X - xbar
    S = Xc.T @ Xc
    w, _ = _eig_sym(S) if S.size else (np.zeros(0), None)
    rank = int(np.count_nonzero(_kept(w, PINV_REL_TOL)))
    return CenteredDesign(_frozen(Xc), _frozen(xbar), _frozen(S), rank)


def hat_matrix(cd):
    """H = Xc pinv(SigmaHat) Xc^T, built from the kept eigenpairs so it is exactly symmetric."""
    n, p = cd.Xc.shape
    if p == 0:
        return HatMatrix(np.zeros((n, n)))
    w, V = _eig_sym(cd.SigmaHat)
    keep = _kept(w, PINV_REL_TOL)
    A = cd.Xc @ V[:, keep] / np.sqrt(w[keep])
    return HatMatrix(A @ A.T)


def hat_from_covariates(X):
    return hat_matrix(center_design(X))
