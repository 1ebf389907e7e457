import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def random_spd(rng, n, shift=1.0):
    """Random SPD matrix A'A + shift*I."""
    A = rng.normal(size=(n, n))
    return A.T @ A + shift * np.eye(n)
