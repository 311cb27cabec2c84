import numpy as np
import pytest

from nonlin_eig.graph import WeightedGraph, grid_graph, path_graph


def random_graph(seed, n=None, p_edge=0.4, connected=True):
    """Erdos-Renyi graph with uniform weights; a spanning path makes it connected."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 12)) if n is None else n
    edges = {}
    if connected:
        perm = rng.permutation(n)
        for a, b in zip(perm, perm[1:]):
            edges[(min(a, b), max(a, b))] = rng.uniform(0.2, 3.0)
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p_edge:
                edges[(i, j)] = rng.uniform(0.2, 3.0)
    return WeightedGraph(n, [(i, j, w) for (i, j), w in edges.items()])


def dense_laplacian(g):
    L = np.zeros((g.n, g.n))
    for i, j, w in g.edges:
        L[i, i] += w
        L[j, j] += w
        L[i, j] -= w
        L[j, i] -= w
    return L


@pytest.fixture
def two_node():
    return WeightedGraph(2, [(0, 1, 1.0)])


@pytest.fixture
def p3():
    return path_graph(3)


@pytest.fixture
def grid5():
    return grid_graph(5)
