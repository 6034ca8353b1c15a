import numpy as np
import pytest

from maxagree import Dataset, table_set_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


@pytest.fixture
def set1_data():
    """Moderate bivariate sample from parameter set 1 (rho = 0.816)."""
    return table_set_dataset(1, 200, seed=101)


def random_dataset(rng, n, p, rho_scale=0.6):
    """A well-conditioned random dataset with correlated response."""
    a = rng.standard_normal((p, p))
    cov = a @ a.T + p * np.eye(p)
    x = rng.multivariate_normal(np.zeros(p), cov, size=n)
    beta = rng.standard_normal(p)
    y = 1.0 + x @ beta + rho_scale * np.linalg.norm(beta) * rng.standard_normal(n)
    return Dataset(x, y)
