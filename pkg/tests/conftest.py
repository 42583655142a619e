import numpy as np
import pytest

from mg1socp.location import LocationInstance


def tiny_instance(d=0.0, lam=1.0):
    """One facility, one level, one customer: f=10, w=1, mu=2, sigma=0.5."""
    return LocationInstance(f=[[10.0]], d=[[d]], lam=[lam], mu=[[2.0]], sigma=[[0.5]], w=[1.0])


def random_instance(seed, n_i=3, n_k=2, n_j=5):
    """Small instance with rates growing by level; always admits a feasible assignment."""
    rng = np.random.default_rng(seed)
    mu = rng.uniform(10, 20, (n_i, 1)) * np.arange(1, n_k + 1) / n_k
    return LocationInstance(
        f=rng.uniform(50, 100, (n_i, n_k)),
        d=rng.uniform(0, 10, (n_i, n_j)),
        lam=rng.uniform(1, 5, n_j),
        mu=mu,
        sigma=rng.uniform(1, 3, (n_i, n_k)) / mu,
        w=rng.uniform(5, 20, n_i),
    )


@pytest.fixture
def tiny():
    return tiny_instance()
