import numpy as np
import pytest


def random_digraph(rng, n, density=0.4):
    """Dense 0/1 matrix with iid Bernoulli(density) entries."""
    return (rng.random((n, n)) < density).astype(float)


def random_orthonormal(rng, n, k):
    q, _ = np.linalg.qr(rng.standard_normal((n, k)))
    return q


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
