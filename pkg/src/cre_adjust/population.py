"""The fixed finite population (X, y(1)) that randomization-based moments condition on."""
from dataclasses import dataclass, field

import numpy as np

from .design import CenteredDesign, HatMatrix, _frozen, center_design, hat_matrix, pinv
from .errors import InputError


@dataclass(frozen=True)
class FixedPopulation:
    X: np.ndarray
    y1: np.ndarray
    cd: CenteredDesign = field(init=False, repr=False)
    hat: HatMatrix = field(init=False, repr=False)

    def __post_init__(self):
        cd = center_design(self.X)
        y1 = np.asarray(self.y1, dtype=float)
        if y1.shape != (cd.n,):
            raise InputError("outcome length does not match the covariates")
        if not np.all(np.isfinite(y1)):
            raise InputError("outcomes must be finite")
        object.__setattr__(self, "X", _frozen(np.asarray(self.X, dtype=float).reshape(cd.n, -1)))
        object.__setattr__(self, "y1", _frozen(y1))
        object.__setattr__(self, "cd", cd)
        object.__setattr__(self, "hat", hat_matrix(cd))

    @property
    def n(self):
        return self.cd.n

    @property
    def p(self):
        return self.cd.p

    @property
    def taubar(self):
        return float(np.mean(self.y1))

    @property
    def sigma_y(self):
        """Xc^T diag(y1) Xc."""
        Xc = self.cd.Xc
        return Xc.T @ (self.y1[:, None] * Xc)

    def with_outcome(self, y1):
        """Same covariates, new outcome vector; reuses the already built hat matrix."""
        new = object.__new__(FixedPopulation)
        y1 = np.asarray(y1, dtype=float)
        if y1.shape != (self.n,):
            raise InputError("outcome length does not match the covariates")
        object.__setattr__(new, "X", self.X)
        object.__setattr__(new, "y1", _frozen(y1))
        object.__setattr__(new, "cd", self.cd)
        object.__setattr__(new, "hat", self.hat)
        return new

    def trace_terms(self):
        """tr(Sy S^-) and tr((Sy S^-)^2) from p x p products."""
        if self.p == 0:
            return 0.0, 0.0
        M = self.sigma_y @ pinv(self.cd.SigmaHat)
        return float(np.trace(M)), float(np.sum(M * M.T))
