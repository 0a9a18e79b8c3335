import numpy as np
import pytest

from subgraphx import Graph


@pytest.fixture
def path3():
    return Graph(num_nodes=3, edges=((0, 1), (1, 2)), features=np.zeros((3, 4)))


@pytest.fixture
def cycle5():
    return Graph(
        num_nodes=5,
        edges=((0, 1), (1, 2), (2, 3), (3, 4), (0, 4)),
        features=np.ones((5, 3)),
        label=0,
    )


@pytest.fixture
def star5():
    return Graph(num_nodes=5, edges=((0, 1), (0, 2), (0, 3), (0, 4)), features=np.zeros((5, 2)))


@pytest.fixture
def triangle():
    return Graph(
        num_nodes=3,
        edges=((0, 1), (1, 2), (0, 2)),
        features=np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]),
        label=0,
    )


def random_connected_graph(rng, n, extra_edges=2, feature_dim=3, label=None):
    """Random spanning tree plus a few extra edges; always connected."""
    edges = set()
    order = rng.permutation(n)
    for i in range(1, n):
        a, b = order[i], order[rng.integers(0, i)]
        edges.add((min(a, b), max(a, b)))
    attempts = 0
    while len(edges) < n - 1 + extra_edges and attempts < 50:
        a, b = rng.integers(0, n, 2)
        attempts += 1
        if a != b:
            edges.add((min(int(a), int(b)), max(int(a), int(b))))
    return Graph(
        num_nodes=n,
        edges=tuple(edges),
        features=rng.normal(size=(n, feature_dim)),
        label=label,
    )
