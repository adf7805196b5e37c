import numpy as np
import pytest

from bandmpc.linsys import LinearStateSpace


def random_stable(rng, n, fs=20000.0, radius=0.9):
    """Random SISO model with spectral radius ``radius``."""
    A = rng.standard_normal((n, n))
    A *= radius / np.max(np.abs(np.linalg.eigvals(A)))
    B = rng.standard_normal((n, 1))
    C = rng.standard_normal((1, n))
    return LinearStateSpace(A, B, C, fs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def scalar_model():
    return LinearStateSpace([[1.0]], [[1.0]], [[1.0]], 1000.0)
