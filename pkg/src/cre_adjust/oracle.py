"""Exact randomization moments by enumerating every CRE assignment, plus a Monte Carlo fallback."""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .estimators import batch_estimates
from .randomization import (DEFAULT_ENUM_CAP, assignment_matrix, count_assignments,
                            sample_assignments)
from .rng import stream

CHUNK = 50_000


@dataclass(frozen=True)
class FunctionalMoments:
    mean: float
    variance: float
    support_size: int
    extrema: tuple
    mean_se: float = 0.0
    variance_se: float = 0.0


def estimator_functional(kind, d):
    """Adapter so an estimator can be handed to exact_moments / mc_moments."""
    def f(T, pop):
        return batch_estimates(kind, T, pop.y1, pop.hat.H, d.pi1)
    f.kind = kind
    return f


def _reduce(values):
    values = np.asarray(values, dtype=float)
    # fsum is correctly rounded, so the result does not depend on summation order
    mean = math.fsum(values) / values.size
    var = math.fsum((values - mean) ** 2) / values.size
    return mean, var


def enumerate_values(f, pop, d, cap=DEFAULT_ENUM_CAP, workers=1, chunk=CHUNK):
    total = count_assignments(d)
    assignment_matrix(d, cap=cap, start=0, stop=0)  # cap check up front
    bounds = [(s, min(s + chunk, total)) for s in range(0, total, chunk)]

    def run(b):
        return np.asarray(f(assignment_matrix(d, cap=cap, start=b[0], stop=b[1]), pop), dtype=float)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, bounds))
    else:
        parts = [run(b) for b in bounds]
    return np.concatenate(parts)


def exact_moments(f, pop, d, cap=DEFAULT_ENUM_CAP, workers=1):
    """Mean and variance of f(t) with t uniform over all CRE assignments.

    f maps a K x n batch of assignments (and the population) to K values.
    """
    if not d.is_cre:
        raise UsageError("enumeration oracle needs a CRE design")
    values = enumerate_values(f, pop, d, cap=cap, workers=workers)
    mean, var = _reduce(values)
    return FunctionalMoments(mean, var, values.size, (float(values.min()), float(values.max())))


def _jackknife_var_se(values):
    K = values.size
    if K < 3:
        return float("nan")
    m = values.mean()
    dev2 = (values - m) ** 2
    ss = dev2.sum()
    loo = (ss - K / (K - 1) * dev2) / (K - 2)
    return float(np.sqrt((K - 1) / K * np.sum((loo - loo.mean()) ** 2)))


def mc_moments(f, pop, d, K, seed, block=4096):
    """Monte Carlo mean/variance with jackknife standard errors.

    Assignments are drawn in blocks; block b uses its own derived stream, so
    the draw is fixed by (seed, K).
    """
    K = int(K)
    if K < 2:
        raise UsageError("need K >= 2 replicates")
    parts = []
    for b, s in enumerate(range(0, K, block)):
        T = sample_assignments(d, stream(seed, "mc_moments", b), min(block, K - s))
        parts.append(np.asarray(f(T, pop), dtype=float))
    values = np.concatenate(parts)
    mean = float(values.mean())
    var = float(values.var(ddof=1))
    # for the mean the jackknife SE reduces to sd / sqrt(K)
    mean_se = float(values.std(ddof=1) / np.sqrt(K))
    return FunctionalMoments(mean, var, K, (float(values.min()), float(values.max())),
                             mean_se, _jackknife_var_se(values))
