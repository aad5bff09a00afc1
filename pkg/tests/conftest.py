import numpy as np
import pytest

from indisim.core import random_density_matrix
from indisim.environment import EnvState


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_env(rng, d=None, max_d=6, rank=None):
    d = int(rng.integers(1, max_d + 1)) if d is None else d
    return EnvState(random_density_matrix(d * d, rng, rank=rank), d, d)


def random_separable(rng, d, terms=4):
    weights = rng.dirichlet(np.ones(terms))
    rho = sum(
        w * np.kron(random_density_matrix(d, rng), random_density_matrix(d, rng))
        for w in weights
    )
    return EnvState(rho, d, d)
