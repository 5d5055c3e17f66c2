import json

import numpy as np
import pytest

from splitforge import TimingModel, compute_schedule, iteration_stats, lower_bound_q, preset
from splitforge.experiments import cluster_design, cluster_timing
from splitforge.sched import activity_network, export_activity_network, export_gantt


def test_two_block_constant_timing():
    for n in (4, 6):
        tm = TimingModel.constant(n, 1.0, 0.25)
        s = compute_schedule(preset("two_block_fiedler", n), tm, 8)
        st = iteration_stats(s)
        assert st["c1"] == 2.5
        assert st["c_inf"] == pytest.approx(2.5, abs=1e-12)
        assert lower_bound_q(tm, 0.25) == 2.5
        assert np.allclose(s.e, 2.5 * np.arange(1, 9))


def test_mt_serial_chain():
    s = compute_schedule(preset("mt", 3), TimingModel.constant(3, 1.0, 1.0), 3)
    assert np.allclose(s.s[0], [0, 2, 4])
    assert s.e[0] == 6.0


def test_dr_schedule():
    # x2 waits for x1; next x1 waits for x2
    s = compute_schedule(preset("dr", 2), TimingModel.constant(2, 1.0, 0.5), 3)
    assert np.allclose(s.s[:, 0], [0.0, 3.0, 6.0])
    assert np.allclose(s.s[:, 1], [1.5, 4.5, 7.5])
    assert np.allclose(s.e, [3.0, 6.0, 9.0])


def test_cluster_schedule():
    s = compute_schedule(cluster_design(), cluster_timing(), 12)
    assert s.e[0] == pytest.approx(74.75)
    assert s.e[11] == pytest.approx(646.75)
    assert iteration_stats(s)["c_inf"] == pytest.approx(52.0)


def test_timing_validation():
    with pytest.raises(ValueError):
        TimingModel([1, -1], np.ones((2, 2)))
    with pytest.raises(ValueError):
        TimingModel([1, 1], [[0, 1], [2, 0]])
    with pytest.raises(ValueError):
        TimingModel([1, 1], [[0, 0], [0, 0]])
    tm = TimingModel.from_json('{"t": [1, 2, 3], "l": 0.5}')
    assert tm.constant_latency() == 0.5
    assert TimingModel.from_dict(tm.to_dict()).l.tolist() == tm.l.tolist()


def test_random_timing_ranges():
    tm = TimingModel.random(7, seed=3)
    off = tm.l[~np.eye(7, dtype=bool)]
    assert np.all((tm.t >= 0.5) & (tm.t <= 2.0))
    assert np.all((off >= 1.0) & (off <= 11.0))
    assert np.array_equal(tm.t, TimingModel.random(7, seed=3).t)


def test_lower_bound_general():
    tm = TimingModel([1.0, 2.0, 3.0], [[0, 1, 4], [1, 0, 2], [4, 2, 0]])
    # t + min latency = 2, 3, 5
    assert lower_bound_q(tm) == 7.0


def test_gantt_exports():
    d = preset("two_block_fiedler", 4)
    tm = TimingModel.constant(4, 1.0, 0.25)
    s = compute_schedule(d, tm, 2)
    rows = export_gantt(s, tm, "csv").splitlines()
    assert rows[0] == "iter,resolvent,start,end"
    assert len(rows) == 1 + 8
    svg = export_gantt(s, tm, "svg")
    assert svg.startswith("<svg") and svg.count("<rect") == 8
    with pytest.raises(ValueError):
        export_gantt(s, tm, "png")


def test_activity_network():
    net = activity_network(preset("mt", 3))
    assert net["within"] == [{"from": 1, "to": 2}, {"from": 1, "to": 3}, {"from": 2, "to": 3}]
    assert {(e["a"], e["b"]) for e in net["between"]} == {(1, 2), (2, 3)}
    assert json.loads(export_activity_network(preset("mt", 3))) == net
    dot = export_activity_network(preset("mt", 3), fmt="dot")
    assert dot.startswith("digraph") and "x1 -> x2" in dot
