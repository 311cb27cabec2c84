"""Lipschitz ground state on a grid with the boundary held at zero.

The limit is a multiple of the graph distance to the boundary.
"""

import numpy as np

from nonlin_eig import PowerConfig, dijkstra_distance, graph_lipschitz, grid_boundary, grid_graph, run_power

n = 20
g = grid_graph(n)
b = grid_boundary(n)
J = graph_lipschitz(g, b)
u0 = np.ones(g.n)
u0[b] = 0.0
res, tr = run_power(PowerConfig(J), u0)
d = dijkstra_distance(g, b)
err = np.linalg.norm(res.u / np.linalg.norm(res.u) - d / np.linalg.norm(d))
print(f"{res.iterations} iterations, lambda={res.lam:.6f}, relative error to distance field {err:.2e}")
print(np.round(res.u.reshape(n, n)[: n // 2, : n // 2] / res.u.max(), 2))
