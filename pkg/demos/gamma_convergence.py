"""Ground states along a grid refinement family.

Successor gaps in the eigenvalue and in the aligned fields shrink as the
grid is refined.
"""

from nonlin_eig import build_family, convergence_report, ground_state_per_level

fam = build_family({"kind": "grid2d", "levels": [8, 16, 32]}, {"kind": "graph_lipschitz", "constraint": "boundary"})
tab = ground_state_per_level(fam, {"rule": "variable", "max_iter": 300})
print(tab.to_csv())
for line in convergence_report(tab).lines():
    print(line)
