import numpy as np
import pytest

from cre_adjust.population import FixedPopulation
from cre_adjust.randomization import cre


def make_population(n, p, seed, shift=1.0):
    gen = np.random.default_rng(seed)
    X = gen.standard_normal((n, p))
    y = shift + (X @ gen.standard_normal(p) if p else 0.0) + gen.standard_normal(n)
    return FixedPopulation(X, y)


@pytest.fixture
def pop84():
    return make_population(8, 2, 11)


@pytest.fixture
def cre84():
    return cre(8, 4)
