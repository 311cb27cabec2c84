import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nonlin_eig.graph import (
    DimensionError, EdgeField, NormKind, WeightedGraph, componentwise_mean, dijkstra_distance, div,
    edge_inner, grad, grid_graph, norm, nullspace_project, path_graph,
)
from nonlin_eig.functionals import graph_lipschitz

from conftest import dense_laplacian, random_graph

seeds = st.integers(0, 2**32 - 1)


def test_grad_two_node_unit_weight(two_node):
    assert grad(two_node, [0.0, 1.0]).values.tolist() == [1.0]


def test_grad_two_node_weight_four():
    g = WeightedGraph(2, [(0, 1, 4.0)])
    assert grad(g, [1.0, -1.0]).values.tolist() == [-4.0]


def test_grad_of_constant_is_zero(grid5):
    assert not np.any(grad(grid5, np.full(25, 3.7)).values)


def test_div_zero_and_unit_edge(two_node):
    assert np.array_equal(div(two_node, np.zeros(1)), np.zeros(2))
    assert div(two_node, EdgeField(two_node, [1.0])).tolist() == [-2.0, 2.0]


def test_vertex_norms():
    assert norm([3.0, 4.0], NormKind.L2) == 5.0
    assert norm([3.0, -4.0], "l1") == 7.0
    assert norm([3.0, -4.0], "linf") == 4.0


def test_components():
    assert WeightedGraph(2, [(0, 1, 1.0)]).is_connected
    g = WeightedGraph(4, [(0, 1, 1.0), (2, 3, 1.0)])
    assert len(set(g.components.tolist())) == 2
    assert grid_graph(5).is_connected


def test_nullspace_projection_examples(p3):
    assert np.allclose(componentwise_mean(p3, [1.0, 2.0, 3.0]), 2.0)
    g = WeightedGraph(4, [(0, 1, 1.0), (2, 3, 1.0)])
    assert componentwise_mean(g, [0.0, 2.0, 10.0, 20.0]).tolist() == [1.0, 1.0, 15.0, 15.0]
    J = graph_lipschitz(p3, constraint=[0])
    assert not np.any(nullspace_project(p3, [5.0, 1.0, 2.0], J))


def test_dimension_errors(two_node):
    with pytest.raises(DimensionError):
        grad(two_node, [1.0, 2.0, 3.0])
    with pytest.raises(DimensionError):
        div(two_node, np.zeros(3))


def test_edges_canonical_and_zero_weights_dropped():
    g = WeightedGraph(3, [(2, 0, 1.5), (1, 2, 0.0)])
    assert g.edges == [(0, 2, 1.5)]


@pytest.mark.parametrize("edges", [[(0, 0, 1.0)], [(0, 1, -1.0)], [(0, 1, 1.0), (1, 0, 2.0)], [(0, 5, 1.0)]])
def test_invalid_edges_rejected(edges):
    with pytest.raises(ValueError):
        WeightedGraph(3, edges)


def test_grid_counts():
    g = grid_graph(4, h=0.25)
    assert (g.n, g.m) == (16, 24)
    assert np.allclose(g.weights, 16.0)


def test_dijkstra_on_path():
    g = path_graph(4, weight=4.0)
    assert np.allclose(dijkstra_distance(g, [0]), [0.0, 0.5, 1.0, 1.5])


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_div_is_adjoint_of_grad(seed):
    g = random_graph(seed)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(g.n)
    h = EdgeField(g, rng.standard_normal(g.m))
    gu = grad(g, u)
    lhs = edge_inner(gu, h) - float(np.dot(u, div(g, h)))
    assert abs(lhs) <= 1e-10 * (norm(gu) * norm(h) + 1.0)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_laplacian_matches_dense(seed):
    g = random_graph(seed)
    u = np.random.default_rng(seed).standard_normal(g.n)
    assert np.allclose(g.laplacian_matvec(u), dense_laplacian(g) @ u)


@settings(max_examples=50, deadline=None)
@given(seeds, st.booleans())
def test_grad_kernel_is_componentwise_constants(seed, constant):
    g = random_graph(seed, connected=False, p_edge=0.2)
    rng = np.random.default_rng(seed)
    if constant:
        u = rng.standard_normal(g.n)[g.components]
        assert not np.any(grad(g, u).values)
    else:
        u = rng.standard_normal(g.n)
        if np.allclose(u, componentwise_mean(g, u)):
            return
        assert norm(grad(g, u)) > 0


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_nullspace_projection_idempotent_and_nearest(seed):
    g = random_graph(seed, connected=False, p_edge=0.2)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(g.n)
    ub = nullspace_project(g, u)
    assert np.allclose(nullspace_project(g, ub), ub, atol=1e-14)
    for _ in range(20):
        v = rng.standard_normal(g.n)[g.components]
        assert np.linalg.norm(u - ub) <= np.linalg.norm(u - v) + 1e-12
