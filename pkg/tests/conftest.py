import numpy as np
import pytest


def unit_gaussian(n, seed):
    x = np.random.default_rng(seed).standard_normal(n)
    return x / np.linalg.norm(x)


def lstsq_estimate(X, Y):
    """Least-squares fit via LAPACK gelsd, independent of the package's SVD path."""
    sol, *_ = np.linalg.lstsq(X.T, Y.T, rcond=None)
    return sol.T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
