import numpy as np
import pytest

from splitforge import TimingModel, min_edges_design, min_time_design_milp, min_time_design_misdp, validate
from splitforge.discrete import Relaxation, branch_and_bound, edge_counts


def _knapsack_relax(values, weights, cap):
    """LP relaxation of a 0/1 knapsack (maximize value) as a minimization."""
    values, weights = np.asarray(values, float), np.asarray(weights, float)

    def relax(fix):
        x = np.zeros(len(values))
        room = cap
        for i, v in fix.items():
            x[i] = v
            room -= weights[i] * v
        if room < -1e-12:
            return Relaxation("infeasible", np.inf, None)
        free = [i for i in np.argsort(-values / weights) if i not in fix]
        for i in free:
            take = min(1.0, room / weights[i])
            x[i] = take
            room -= take * weights[i]
            if room <= 0:
                break
        return Relaxation("optimal", -float(values @ x), x, x.copy())

    return relax


def test_branch_and_bound_knapsack():
    values, weights = [10, 13, 7, 8, 4], [5, 7, 4, 5, 3]
    res = branch_and_bound(_knapsack_relax(values, weights, 12), 5)
    assert res.status == "optimal"
    # brute force
    best = max(sum(v for v, b in zip(values, bits) if b)
               for bits in np.ndindex(*(2,) * 5)
               if sum(w for w, b in zip(weights, bits) if b) <= 12)
    assert -res.value == pytest.approx(best)
    assert res.log[-1].startswith("finished")


def test_branch_and_bound_infeasible_root():
    res = branch_and_bound(lambda fix: Relaxation("infeasible", np.inf, None), 3)
    assert res.status == "infeasible"


def test_branch_and_bound_budget():
    res = branch_and_bound(_knapsack_relax([3, 4, 5, 6] * 3, [2, 3, 4, 5] * 3, 13), 12,
                           node_budget=2)
    assert res.status in ("suboptimal", "optimal")
    assert res.nodes <= 3


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_min_edges(n):
    r = min_edges_design(n)
    assert r.status == "optimal"
    assert round(r.objective) == 2 * n - 1
    z, w = edge_counts(r.design)
    assert z + w == 2 * n - 1
    assert validate(r.design, tol=r.design.meta.get("validated_tol", 1e-6)).passed


def test_min_edges_unseeded_n4():
    r = min_edges_design(4, seed_incumbents=False)
    assert r.status == "optimal" and round(r.objective) == 7


def test_misdp_constant_timing():
    r = min_time_design_misdp(4, TimingModel.constant(4, 1.0, 0.25), r=4)
    assert r.status == "optimal"
    assert r.end_time == pytest.approx(10.0)
    assert validate(r.design, tol=1e-6).passed


def test_misdp_beats_blocks():
    tm = TimingModel([4, 1, 1, 4, 1, 1], np.full((6, 6), 0.25))
    r = min_time_design_misdp(6, tm, r=6)
    assert r.end_time == pytest.approx(33.0)
    assert r.end_time < 41.0  # best equal-size block design


def test_milp_constant_timing():
    r = min_time_design_milp(6, TimingModel.constant(6, 1.0, 0.25), r=6)
    assert r.status == "optimal"
    assert r.end_time == pytest.approx(15.0)


def test_milp_sign_restriction():
    r = min_time_design_milp(5, TimingModel.random(5, seed=1), r=5, time_limit=30)
    d = r.design
    off = ~np.eye(5, dtype=bool)
    assert np.all(d.W[off] <= 1e-9)
    assert np.all(d.Z[off] <= d.W[off] + 1e-9)
    assert validate(d, tol=1e-6).passed


def test_milp_full_rows():
    r = min_time_design_milp(4, TimingModel.constant(4, 1.0, 0.5), r=4, min_row_nonzeros=3)
    assert np.all(np.abs(r.design.W[~np.eye(4, dtype=bool)]) > 1e-6)


def test_milp_highs_backend_agrees():
    tm = TimingModel.constant(4, 1.0, 0.25)
    a = min_time_design_milp(4, tm, r=4)
    b = min_time_design_milp(4, tm, r=4, backend="highs")
    assert a.end_time == pytest.approx(b.end_time)
