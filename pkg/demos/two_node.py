"""Two-node graph: prox shrinkage, reconstruction and extinction thresholds."""

import math

import numpy as np

from nonlin_eig import (
    PowerConfig, ProxProblem, exact_reconstruction_time, extinction_bounds, graph_tv, path_graph, run_power,
    solve_prox,
)

g = path_graph(2)
J = graph_tv(g)
f = np.array([1.0, -1.0])

# squared l2 data: u = (1 - 2 sigma) f until everything is gone at sigma = 1/2
for sigma in (0.1, 0.25, 0.4, 0.5):
    sol = solve_prox(ProxProblem(f, sigma, J))
    print(f"sigma={sigma:4.2f}  u={np.round(sol.u, 10)}  gap={sol.gap:.1e}  extinct={sol.hit_extinction}")

# unsquared l2 data keeps f exactly up to sigma_*
s_star = exact_reconstruction_time(f, J)
print(f"sigma_* = {s_star:.12f}   1/(2 sqrt 2) = {1 / (2 * math.sqrt(2)):.12f}")
print("sigma_** lower bound:", extinction_bounds(f, J, 2, lambda1=2 * math.sqrt(2))[0])

res, _ = run_power(PowerConfig(J), f)
print(f"power method: u={res.u}, lambda={res.lam:.12f} (2 sqrt 2 = {2 * math.sqrt(2):.12f})")
