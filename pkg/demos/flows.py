"""Normalized gradient flow, FAGP and Nossek flows on a path graph.

All three drive the same start towards the Fiedler direction.
"""

import numpy as np

from nonlin_eig import FlowConfig, graph_dirichlet, path_graph, run_flow

g = path_graph(3)
J = graph_dirichlet(g)
f = np.array([1.0, 0.2, -0.5])
dt, steps = 1e-3, 3000

finals = {}
for kind in ("ngf", "fagp", "nossek"):
    tr = run_flow(FlowConfig(kind, J, dt=dt, steps=steps, inner_tol=1e-12), f)
    u = tr.normalized[-1] if kind == "ngf" else tr.final
    finals[kind] = u / np.linalg.norm(u)
    R = tr.column("rayleigh")
    print(f"{kind:7s} final {np.round(finals[kind], 6)}  rayleigh {R[0]:.4f} -> {R[-1]:.6f}")

print("exact Fiedler direction", np.round(np.array([1.0, 0.0, -1.0]) / np.sqrt(2), 6), "lambda", 4.0)
