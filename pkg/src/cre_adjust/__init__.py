"""Covariate-adjusted estimators of the treated-arm mean in completely randomized
experiments, with exact randomization moments and an enumeration oracle."""
from .design import center_design, hat_from_covariates, hat_matrix, pinv
from .errors import DegenerateDesignError, InputError, ResourceError, UsageError
from .estimators import EstimatorKind, ObservedDataset, estimate, estimate_all
from .population import FixedPopulation
from .randomization import Design, bernoulli, cre, cre_from_ratio

__version__ = "0.1.0"

__all__ = [
    "Design", "DegenerateDesignError", "EstimatorKind", "FixedPopulation", "InputError",
    "ObservedDataset", "ResourceError", "UsageError", "bernoulli", "center_design", "cre",
    "cre_from_ratio", "estimate", "estimate_all", "hat_from_covariates", "hat_matrix", "pinv",
]
