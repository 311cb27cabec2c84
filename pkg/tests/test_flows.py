import math

import numpy as np
import pytest

from nonlin_eig.flows import (
    FlowBlowUpError, FlowConfig, fagp_velocity, mm_power_equivalence, nossek_velocity, rescaled_flow_check,
    run_fagp, run_minmove, run_normalized_gf, run_nossek,
)
from nonlin_eig.functionals import DegenerateInputError, graph_dirichlet, graph_tv
from nonlin_eig.graph import path_graph
from nonlin_eig.power import PowerConfig, run_power

from conftest import dense_laplacian, random_graph

F3 = np.array([1.0, 0.2, -0.5])


def align(a, b):
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    return min(np.linalg.norm(a - b), np.linalg.norm(a + b))


def test_minmove_dirichlet_matches_dense_resolvent():
    g = random_graph(4, n=15)
    J = graph_dirichlet(g)
    f = np.random.default_rng(4).standard_normal(15)
    tau = 0.05
    tr = run_minmove(FlowConfig("minmove", J, dt=tau, steps=8, inner_tol=1e-12), f)
    A = np.eye(15) + 4.0 * tau * dense_laplacian(g)
    u = f.copy()
    for k in range(1, 9):
        u = np.linalg.solve(A, u)
        assert np.allclose(tr.iterates[k], u, atol=1e-8)
    J_vals = tr.column("J")
    R = tr.column("rayleigh")
    assert np.all(np.diff(J_vals) <= 1e-12) and np.all(np.diff(R) <= 1e-10)


def test_minmove_constant_is_stationary(p3):
    tr = run_minmove(FlowConfig("minmove", graph_tv(p3), dt=0.1, steps=5), np.full(3, 2.0))
    assert np.array_equal(tr.final, np.full(3, 2.0))


def test_minmove_two_node_tv_extinction_step(two_node):
    # each step shrinks f = a (1, -1) to (a - 2 tau)(1, -1) until a <= 2 tau
    tau = 0.15
    tr = run_minmove(FlowConfig("minmove", graph_tv(two_node), dt=tau, steps=20), np.array([1.0, -1.0]))
    a = [1.0 - 2 * tau * k for k in range(4)]
    for k in range(4):
        assert np.allclose(tr.iterates[k], a[k] * np.array([1.0, -1.0]), atol=1e-10)
    assert np.allclose(tr.iterates[4], 0.0, atol=1e-10)
    assert tr.extinct and len(tr.iterates) == 5


def test_normalized_flow_unit_norm_and_monotone_rayleigh(p3):
    J = graph_dirichlet(p3)
    tr = run_normalized_gf(FlowConfig("ngf", J, dt=1e-2, steps=200, inner_tol=1e-10), F3)
    for w in tr.normalized:
        assert abs(np.linalg.norm(w) - 1.0) <= 1e-12
    R = tr.column("rayleigh")
    assert np.all(np.diff(R) <= 10 * 1e-10)


def test_normalized_flow_matches_power_method(p3):
    J = graph_dirichlet(p3)
    tr = run_normalized_gf(FlowConfig("ngf", J, dt=1e-2, steps=400, inner_tol=1e-12), F3)
    res, _ = run_power(PowerConfig(J, max_iter=500, angle_tol=1e-14), F3)
    assert align(tr.normalized[-1], res.u) <= 1e-4


def test_normalized_flow_truncates_at_extinction(two_node):
    tr = run_normalized_gf(FlowConfig("ngf", graph_tv(two_node), dt=0.1, steps=50), np.array([1.0, -1.0]))
    assert tr.extinct and len(tr.normalized) < 51


def test_fagp_norm_drift_first_order(p3):
    J = graph_dirichlet(p3)
    T = 0.5
    drift = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        tr = run_fagp(FlowConfig("fagp", J, dt=dt, steps=int(round(T / dt))), F3)
        drift.append(np.max(np.abs(tr.column("norm") - 1.0)))
    orders = np.log2(np.array(drift[:-1]) / np.array(drift[1:]))
    assert np.all(orders >= 0.9)


def test_fagp_eigenvector_is_stationary(two_node):
    u = np.array([1.0, -1.0]) / math.sqrt(2)
    assert np.linalg.norm(fagp_velocity(graph_tv(two_node), u)) <= 1e-8
    tr = run_fagp(FlowConfig("fagp", graph_tv(two_node), dt=1e-2, steps=50), u)
    assert np.allclose(tr.final, u, atol=1e-8)


def test_fagp_rayleigh_nonincreasing(p3):
    tr = run_fagp(FlowConfig("fagp", graph_dirichlet(p3), dt=1e-3, steps=500), F3)
    assert np.all(np.diff(tr.column("rayleigh")) <= 1e-6)


def test_fagp_blowup_detected(p3):
    with pytest.raises(FlowBlowUpError):
        run_fagp(FlowConfig("fagp", graph_dirichlet(p3), dt=5.0, steps=50), F3)


def test_nossek_quotient_bounded_and_tends_to_one(p3):
    tr = run_nossek(FlowConfig("nossek", graph_dirichlet(p3), dt=1e-3, steps=3000, reparametrize=True), F3)
    q = tr.column("quotient")
    assert np.all(q <= 1.0 + 1e-8)
    assert q[-1] >= 0.95
    t = tr.column("t_reparam")
    assert np.all(np.diff(t) > 0)


def test_nossek_eigenvector_is_stationary(two_node):
    u = np.array([1.0, -1.0]) / math.sqrt(2)
    vel, _ = nossek_velocity(graph_tv(two_node), u)
    assert np.linalg.norm(vel) <= 1e-12


def test_explicit_flows_reject_nullspace_data(p3):
    for run in (run_fagp, run_nossek):
        with pytest.raises(DegenerateInputError):
            run(FlowConfig("fagp", graph_dirichlet(p3), dt=1e-3, steps=2), np.ones(3))


def test_flow_config_validation(p3):
    J = graph_dirichlet(p3)
    for kw in ({"kind": "euler"}, {"kind": "fagp", "dt": -1.0}, {"kind": "fagp", "steps": 0},
               {"kind": "fagp", "H": "l1"}, {"kind": "ngf", "data_p": 1}):
        with pytest.raises(ValueError):
            FlowConfig(functional=J, **kw)


def test_cross_flow_agreement(p3):
    J = graph_dirichlet(p3)
    ngf = run_normalized_gf(FlowConfig("ngf", J, dt=1e-3, steps=3000, inner_tol=1e-12), F3).normalized[-1]
    fagp = run_fagp(FlowConfig("fagp", J, dt=1e-3, steps=3000), F3).final
    nos = run_nossek(FlowConfig("nossek", J, dt=1e-3, steps=3000), F3).final
    assert align(ngf, fagp) <= 1e-2
    assert align(ngf, nos) <= 1e-2
    assert align(fagp, nos) <= 1e-2


def test_minmove_refinement_consistency():
    g = random_graph(2, n=8)
    J = graph_dirichlet(g)
    f = np.random.default_rng(2).standard_normal(8)
    T = 0.2
    finals = [run_minmove(FlowConfig("minmove", J, dt=T / s, steps=s, inner_tol=1e-12), f).final for s in (10, 20, 40)]
    ratio = np.linalg.norm(finals[0] - finals[1]) / np.linalg.norm(finals[1] - finals[2])
    assert 2.0 / 3.0 <= ratio <= 6.0


@pytest.mark.parametrize("kind", ["dirichlet", "tv"])
def test_rescaled_flow_residual_vanishes_under_refinement(kind):
    g = path_graph(5)
    J = graph_dirichlet(g) if kind == "dirichlet" else graph_tv(g)
    f = np.array([1.0, 0.4, 0.1, -0.3, -1.2])
    T = 0.1
    worst = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        tr = run_normalized_gf(FlowConfig("ngf", J, dt=dt, steps=int(round(T / dt)), inner_tol=1e-12), f)
        worst.append(rescaled_flow_check(tr, J).max_residual)
    assert worst[0] > worst[1] > worst[2]


def test_rescaled_flow_eigenvector_datum(two_node):
    J = graph_dirichlet(two_node)
    tr = run_normalized_gf(FlowConfig("ngf", J, dt=1e-2, steps=20, inner_tol=1e-12), np.array([1.0, -1.0]))
    assert rescaled_flow_check(tr, J).max_residual <= 1e-8


@pytest.mark.parametrize("kind", ["dirichlet", "tv"])
def test_minmove_power_equivalence(kind):
    g = random_graph(9, n=8)
    J = graph_dirichlet(g) if kind == "dirichlet" else graph_tv(g)
    f = np.random.default_rng(9).standard_normal(8)
    inner = 1e-8
    _, _, dev = mm_power_equivalence(J, f, [0.01] * 10, inner_tol=inner)
    assert dev <= 10 * inner
