"""Walk the two-diagonal-voxel image through detection, repair and homology.

    python3 demos/two_diagonal_cubes.py
"""
from ecmrepair import (
    BinaryImage,
    betti,
    build_p_complex,
    build_q_complex,
    build_q_grid,
    check_well_composed,
    detect_critical,
    repair_grid,
)

image = BinaryImage([(0, 0, 0), (1, 1, 1)])
g_q = build_q_grid(image)
crit = detect_critical(g_q)
print("critical vertices:", crit)

outcome = repair_grid(g_q, crit)
Q = build_q_complex(g_q)
P = build_p_complex(g_q, outcome, Q)

for name, K in (("Q", Q), ("P", P)):
    wc = check_well_composed(K)
    print(f"{name}: cells {K.counts()}  betti {betti(K)}  euler {K.euler()}  "
          f"E1 violations {len(wc.e1_violations)}  E2 violations {len(wc.e2_violations)}")

# the shared corner becomes a small cube whose six faces are the new square keys
cell = P[(2, 2, 2)]
print("P cell at (2,2,2): dim", cell.dim, "facets", sorted(cell.facets))
