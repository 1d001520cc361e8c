import numpy as np
import pytest

from shufflesim.model import make_model, sis_model, voter_model
from shufflesim.network import generate_regular_bipartite


@pytest.fixture
def sis():
    return sis_model(rate=1.0)


@pytest.fixture
def voter2():
    return voter_model(K=2, rate=1.0)


@pytest.fixture
def cycle4():
    return generate_regular_bipartite(4, 2, seed=11)


def random_model(rng: np.random.Generator, K: int):
    """Random valid model: arbitrary total update rule, nonnegative rates."""
    update = rng.integers(0, K, size=(K, K, 2))
    gamma = rng.random((K, K))
    return make_model(K, gamma, update=update)


def adjacency(graph) -> np.ndarray:
    A = np.zeros((graph.N, graph.N), dtype=np.int64)
    for pairs in graph.matchings:
        for u, v in pairs:
            A[u, v] = 1
            A[v, u] = 1
    return A
