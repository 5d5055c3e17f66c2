"""Wall-clock schedules of designs under computation and latency times.

Run: python3 demos/04_scheduling.py   (writes demos/out/*.svg)
"""
from pathlib import Path

import numpy as np

from splitforge import TimingModel, compute_schedule, iteration_stats, lower_bound_q, preset
from splitforge.experiments import cluster_design, cluster_timing
from splitforge.sched import export_activity_network, export_gantt

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

# Unit resolvents with latency 0.25: the 2-Block design reaches the
# single-iteration lower bound every iteration, the path (MT) does not.
tm = TimingModel.constant(6, 1.0, 0.25)
for name in ("two_block_fiedler", "mt", "fully_connected"):
    st = iteration_stats(compute_schedule(preset(name, 6), tm, 12))
    print(f"{name:18s} c1={st['c1']:.2f}  c_inf={st['c_inf']:.2f}")
print("lower bound q =", lower_bound_q(tm, 0.25))

# Six machines in two racks: fast links inside a rack, one slow cross link
d, tm = cluster_design(), cluster_timing()
s = compute_schedule(d, tm, 12)
print("\ncluster end times:", np.round(s.e[:4], 2), "...", round(s.e[-1], 2))
print("c_inf =", iteration_stats(s)["c_inf"])
(out / "cluster_gantt.svg").write_text(export_gantt(s, tm, "svg"))
(out / "cluster_network.dot").write_text(export_activity_network(d, fmt="dot"))
print("wrote", out / "cluster_gantt.svg")
