"""Nonlinear eigenvectors of homogeneous energies on graphs via proximal power methods."""

__version__ = "0.1.0"

from .graph import (  # noqa: E402
    DimensionError, EdgeField, NormKind, WeightedGraph, dijkstra_distance, div, grad, grid_boundary,
    grid_graph, path_graph, random_geometric_graph,
)
from .functionals import (  # noqa: E402
    INFEASIBLE, DegenerateInputError, Functional, InfeasibleError, dual_seminorm, evaluate,
    graph_dirichlet, graph_lipschitz, graph_tv, grid_tv_central, rayleigh, subgradient,
)
from .prox import (  # noqa: E402
    ExtinctionError, ProxProblem, ProxSolution, exact_reconstruction_bound, exact_reconstruction_time,
    extinction_bounds, prox, solve_prox,
)
from .power import EigenResult, PowerConfig, PowerTrace, certify, lambda_from_mu, run_power  # noqa: E402
from .flows import FlowConfig, FlowTrace, mm_power_equivalence, rescaled_flow_check, run_flow  # noqa: E402
from .gamma import build_family, convergence_report, ground_state_per_level, two_moons  # noqa: E402
