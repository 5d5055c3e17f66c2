"""Designing Z and W by semidefinite programming.

Run: python3 demos/02_design_sdp.py
"""
import numpy as np

from splitforge import InfeasibleDesignError, graph_stats, solve_design
from splitforge.experiments import cluster_constraints, cluster_design
from splitforge.sdpdesign import ConstraintSet, dblock_constraints

np.set_printoptions(precision=3, suppress=True)

# Two blocks of three: no communication inside a block, so both blocks
# can run their resolvents in parallel. The best Fiedler value is 2.
d = solve_design("max_fiedler", dblock_constraints(6, (3, 3)))
print("2-Block max Fiedler: lambda2(Z) =", round(np.linalg.eigvalsh(d.Z)[1], 6),
      " lambda2(W) =", round(np.linalg.eigvalsh(d.W)[1], 6))
print("Z =\n", d.Z)

# Different objectives on the same structure
for obj in ("max_fiedler", "min_slem", "min_resistance"):
    d = solve_design(obj, dblock_constraints(6, (2, 2, 2)))
    g = graph_stats(d.W)
    print(f"3-Block {obj:15s} fiedler={g.fiedler:.3f} slem={g.slem:.3f} "
          f"resistance={g.total_resistance:.3f} W edges={g.edge_count}")

# Impossible requests are caught before any solve when a graph condition fails
try:
    solve_design("max_fiedler", dblock_constraints(4, (3, 1)))
except InfeasibleDesignError as e:
    print("\n(3,1) split:", e)
    for cond, why in e.detail["all"]:
        print("   ", cond, "-", why)

# Nonpositive W entries make the minimal-lifting factor one row per edge
d = solve_design("min_resistance", ConstraintSet(5, stieltjes_w=True))
print("\nStieltjes W off-diagonals all <= 0:",
      bool(np.all(d.W[~np.eye(5, dtype=bool)] <= 0)))

# The six-machine cluster: only the seven physical links may carry
# communication. The printed matrices use the 1-4 link in both Z and W,
# and so does any design on these constraints.
print("\nprinted cluster W =\n", cluster_design().W)
d = solve_design("max_fiedler", cluster_constraints())
print("max-Fiedler on the cluster links: W14 =", round(d.W[0, 3], 3), " Z14 =", round(d.Z[0, 3], 3))
