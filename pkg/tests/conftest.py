import numpy as np
import pytest

from strongtie.fixture import fixture_graph
from strongtie.graph import from_edges


def random_layered(rng: np.random.Generator, n: int, p_weak: float = 0.35, p_strong: float = 0.5):
    """Random simple graph on ``n`` nodes; each edge is strong with probability ``p_strong``."""
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < p_weak
    edges = np.column_stack((iu[keep], ju[keep]))
    strong = rng.random(len(edges)) < p_strong
    return from_edges(n, edges[~strong], edges[strong])


@pytest.fixture
def toy():
    return fixture_graph()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
