import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nonlin_eig.functionals import (
    INFEASIBLE, DegenerateInputError, Functional, InfeasibleError, dual_seminorm, evaluate,
    graph_dirichlet, graph_lipschitz, graph_tv, grid_tv_central, rayleigh, subgradient,
)
from nonlin_eig.graph import dijkstra_distance, grid_graph, path_graph

from conftest import dense_laplacian, random_graph

seeds = st.integers(0, 2**32 - 1)
KINDS = ["dirichlet2", "dirichlet3", "dirichlet1.5", "tv", "grid_tv", "lipschitz", "lipschitz_free"]


def make(kind, seed):
    """A functional of ``kind`` on a random graph plus a feasible random field."""
    rng = np.random.default_rng(seed)
    if kind == "grid_tv":
        g = grid_graph(int(rng.integers(2, 6)))
        J = grid_tv_central(g)
    else:
        g = random_graph(seed)
        if kind.startswith("dirichlet"):
            J = graph_dirichlet(g, p=float(kind[len("dirichlet"):]))
        elif kind == "tv":
            J = graph_tv(g)
        elif kind == "lipschitz":
            J = graph_lipschitz(g, constraint=[0])
        else:
            J = graph_lipschitz(g)
    return J, lambda: _feasible(J, rng.standard_normal(g.n) * rng.uniform(0.1, 3.0))


def _feasible(J, u):
    u[J.constraint] = 0.0
    return u


def test_constant_fields_have_zero_energy(two_node, grid5):
    for J in (graph_dirichlet(two_node), graph_tv(two_node), graph_lipschitz(two_node), grid_tv_central(grid5)):
        assert evaluate(J, np.full(J.graph.n, 2.5)) == 0.0


def test_tv_two_node_counts_both_orientations(two_node):
    assert evaluate(graph_tv(two_node), [1.0, -1.0]) == 4.0


def test_lipschitz_path_example(p3):
    J = graph_lipschitz(p3, constraint=[0])
    assert evaluate(J, [0.0, 1.0, 3.0]) == 2.0
    assert evaluate(J, [1.0, 1.0, 3.0]) is INFEASIBLE
    with pytest.raises(InfeasibleError):
        subgradient(J, [1.0, 1.0, 3.0])


def test_grid_tv_on_linear_ramp():
    # central differences are exact on a ramp away from the boundary
    g = grid_graph(6)
    J = grid_tv_central(g)
    x = g.positions[:, 0]
    y = J.operator @ x
    interior = (x > 1.5 / 6) & (x < 1 - 1.5 / 6)
    assert np.allclose(y[:g.n][interior], 1.0)
    assert np.allclose(y[g.n:], 0.0)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_dirichlet2_subgradient_is_twice_laplacian(seed):
    g = random_graph(seed)
    J = graph_dirichlet(g)
    u = np.random.default_rng(seed).standard_normal(g.n)
    # J(u) = 2 sum_e w (du)^2 = 2 u^T L u, so grad J = 4 L u = 2 (2L) u
    assert np.allclose(subgradient(J, u), 4.0 * dense_laplacian(g) @ u)
    assert math.isclose(float(u @ subgradient(J, u)), 2.0 * evaluate(J, u), rel_tol=1e-12)


def test_zero_field_zero_subgradient(two_node):
    for J in (graph_dirichlet(two_node), graph_tv(two_node), graph_lipschitz(two_node)):
        assert not np.any(subgradient(J, np.zeros(2)))


def test_tv_two_node_subgradient(two_node):
    J = graph_tv(two_node)
    z = subgradient(J, [1.0, -1.0])
    assert z.tolist() == [2.0, -2.0]
    rng = np.random.default_rng(0)
    for v in rng.standard_normal((100, 2)):
        assert evaluate(J, v) >= float(z @ v) - 1e-12


def test_rayleigh_two_node(two_node):
    assert math.isclose(rayleigh(graph_tv(two_node), [1.0, -1.0]), 2.0 * math.sqrt(2.0), rel_tol=1e-15)
    with pytest.raises(DegenerateInputError):
        rayleigh(graph_tv(two_node), [1.0, 1.0])


def test_dual_seminorm_examples(two_node, p3):
    assert math.isclose(dual_seminorm("l2", [3.0, 4.0], path_graph(2)), np.linalg.norm([-0.5, 0.5]))
    assert math.isclose(dual_seminorm("l2", [3.0, 4.0]), 5.0)
    assert dual_seminorm(graph_tv(two_node), [0.0, 0.0]) == 0.0
    assert math.isclose(dual_seminorm(graph_tv(two_node), [1.0, -1.0]), 0.5, rel_tol=1e-12)


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_dual_seminorm_lp_matches_prox_bisection_tv(seed):
    J, draw = make("tv", seed)
    z = draw()
    assert math.isclose(dual_seminorm(J, z, method="lp"), dual_seminorm(J, z, method="prox"), rel_tol=1e-5)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_lipschitz_dual_seminorm_is_pairing_with_distance(seed):
    # for z >= 0 the sup over 1-Lipschitz fields vanishing on the constraint
    # set is attained at the geodesic distance to that set
    J, _ = make("lipschitz", seed)
    z = np.random.default_rng(seed).random(J.graph.n)
    z[J.constraint] = 0.0
    d = dijkstra_distance(J.graph, J.constraint)
    assert math.isclose(dual_seminorm(J, z, method="lp"), float(z @ d), rel_tol=1e-9)


@settings(max_examples=25, deadline=None)
@given(seeds, st.sampled_from(["tv", "lipschitz", "lipschitz_free"]))
def test_subgradients_have_unit_dual_seminorm(seed, kind):
    J, draw = make(kind, seed)
    u = draw()
    assert math.isclose(dual_seminorm(J, subgradient(J, u)), 1.0, rel_tol=1e-8)


def test_grid_tv_subgradient_unit_dual_seminorm_by_bisection():
    g = grid_graph(3)
    J = grid_tv_central(g)
    u = np.random.default_rng(0).standard_normal(g.n)
    assert math.isclose(dual_seminorm(J, subgradient(J, u)), 1.0, rel_tol=1e-4)


@settings(max_examples=25, deadline=None)
@given(seeds, st.sampled_from(["tv", "lipschitz", "lipschitz_free"]))
def test_dual_seminorm_bounds_pairing(seed, kind):
    J, draw = make(kind, seed)
    z, u = draw(), draw()
    zp = z if J.trivial_nullspace else z - z.mean()
    assert float(zp @ u) <= dual_seminorm(J, z) * evaluate(J, u) * (1 + 1e-9) + 1e-12


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from(KINDS), st.floats(-3.0, 3.0))
def test_homogeneity(seed, kind, c):
    J, draw = make(kind, seed)
    u = draw()
    Ju = evaluate(J, u)
    assert abs(evaluate(J, c * u) - abs(c) ** J.alpha * Ju) <= 1e-10 * (1 + abs(c) ** J.alpha * Ju)


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from(KINDS), st.floats(0.0, 1.0))
def test_convexity(seed, kind, theta):
    J, draw = make(kind, seed)
    u, v = draw(), draw()
    lhs = evaluate(J, theta * u + (1 - theta) * v)
    assert lhs <= theta * evaluate(J, u) + (1 - theta) * evaluate(J, v) + 1e-10 * (1 + lhs)


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from(KINDS))
def test_subgradient_inequality(seed, kind):
    J, draw = make(kind, seed)
    u = draw()
    z = subgradient(J, u)
    Ju = evaluate(J, u)
    for _ in range(10):
        v = draw()
        assert evaluate(J, v) >= Ju + float(z @ (v - u)) - 1e-8 * (1 + Ju)


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from(KINDS))
def test_euler_identity(seed, kind):
    J, draw = make(kind, seed)
    u = draw()
    Ju = evaluate(J, u)
    assert abs(float(subgradient(J, u) @ u) - J.alpha * Ju) <= 1e-8 * (1 + Ju)


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from(["dirichlet2", "dirichlet3", "tv", "lipschitz", "lipschitz_free"]))
def test_absolute_value_does_not_increase_energy(seed, kind):
    J, draw = make(kind, seed)
    u = draw()
    assert evaluate(J, np.abs(u)) <= evaluate(J, u) + 1e-12 * (1 + evaluate(J, u))


def test_descriptor_round_trip(grid5):
    for J in (graph_dirichlet(grid5, 3.0), graph_tv(grid5), grid_tv_central(grid5, h=0.01),
              graph_lipschitz(grid5, [0, 5, 7])):
        K = Functional.from_dict(J.to_dict(), grid5)
        u = np.random.default_rng(1).standard_normal(25)
        u[J.constraint] = 0.0
        assert evaluate(K, u) == evaluate(J, u)
    assert Functional.from_dict({"kind": "graph_lipschitz", "constraint": "boundary"}, grid5).constraint.size == 16


@pytest.mark.parametrize("d", [{"kind": "nope"}, {"kind": "graph_dirichlet", "p": 0.5},
                               {"kind": "graph_tv", "constraint": [1]}, {"kind": "graph_lipschitz", "constraint": [99]}])
def test_bad_descriptors(d, grid5):
    with pytest.raises(ValueError):
        Functional.from_dict(d, grid5)


def test_grid_tv_requires_grid(two_node):
    with pytest.raises(ValueError):
        grid_tv_central(two_node)
