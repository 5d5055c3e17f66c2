"""Designs that finish r iterations soonest for given timings.

Run: python3 demos/05_min_time_design.py
"""
import numpy as np

from splitforge import TimingModel, compute_schedule, min_time_design_milp, min_time_design_misdp
from splitforge.experiments import convergence_time, block_baseline
from splitforge.sdpdesign import dblock_constraints
from splitforge import solve_design

np.set_printoptions(precision=2, suppress=True)

# Two slow resolvents (time 4) among four fast ones. Block designs force
# the slow ones to wait on each other; the searched design does not.
tm = TimingModel([4, 1, 1, 4, 1, 1], np.full((6, 6), 0.25))
for sizes in [(3, 3), (2, 2, 2), (1,) * 6]:
    d = solve_design("min_resistance", dblock_constraints(6, sizes))
    print(f"blocks {sizes}: end of iteration 6 = {compute_schedule(d, tm, 6).e[-1]:.2f}")

r = min_time_design_misdp(6, tm, r=6)
print(f"searched design: {r.end_time:.2f} ({r.status}, {r.nodes} nodes)")
print("W =\n", r.design.W)

# The sign-restricted variant is a mixed-integer LP and scales further.
# Random timings, 7 resolvents, W rows with at least 3 nonzeros.
tm = TimingModel.random(7, seed=1)
res = min_time_design_milp(7, tm, r=7, min_row_nonzeros=3, time_limit=20,
                           stage_two="min_resistance")
for label, d in (("3-Block baseline", block_baseline(7)), ("MILP design", res.design)):
    t, ci, tau = convergence_time(d, tm)
    print(f"{label:17s} c_inf={ci:6.2f} tau={tau:.3f} time to 1% = {t:8.1f}")
