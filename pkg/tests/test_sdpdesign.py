import math

import numpy as np
import pytest

from splitforge import InfeasibleDesignError, graph_stats, solve_design, validate
from splitforge.sdpdesign import (ConstraintSet, Objective, build_design_sdp, dblock_constraints,
                                  diagnose)


def test_two_block_fiedler_value():
    for n in (4, 6):
        d = solve_design("max_fiedler", dblock_constraints(n, (n // 2, n // 2)))
        assert np.linalg.eigvalsh(d.Z)[1] == pytest.approx(2.0, abs=1e-5)
        assert np.linalg.eigvalsh(d.W)[1] == pytest.approx(2.0, abs=1e-5)
        assert validate(d).passed


def test_unconstrained_max_fiedler_is_complete_graph():
    d = solve_design("max_fiedler", n=4)
    lam = np.linalg.eigvalsh(d.Z)
    assert lam[1] == pytest.approx(8 / 3, abs=1e-5)


@pytest.mark.parametrize("obj", ["max_fiedler", "min_slem", "min_resistance", "min_znorm",
                                 "feasibility"])
def test_objectives_valid(obj):
    d = solve_design(obj, n=5)
    assert validate(d, tol=d.meta["validated_tol"]).passed
    assert d.meta["objective"] == obj
    assert np.max(np.abs(d.Z.sum(axis=1))) < 1e-12
    assert np.max(np.abs(d.W.sum(axis=1))) < 1e-12


def test_min_resistance_beats_path():
    d = solve_design("min_resistance", n=4)
    assert graph_stats(d.W).total_resistance <= 0.625 + 1e-6


def test_dblock_zero_counts():
    cs = dblock_constraints(6, (2, 2, 2))
    z, w = cs.effective_zeros()
    assert len(z) == 3
    assert len(w) == 4
    d = solve_design("min_resistance", cs)
    for i, j in z:
        assert d.Z[i, j] == 0
    for i, j in w:
        assert d.W[i, j] == 0


def test_diagnose_min_degree():
    issues = diagnose(dblock_constraints(4, (3, 1)))
    names = [c for c, _ in issues]
    assert "z_min_degree" in names
    with pytest.raises(InfeasibleDesignError) as ei:
        solve_design("max_fiedler", dblock_constraints(4, (3, 1)))
    assert ei.value.condition == names[0]
    assert ei.value.detail["all"] == issues


def test_diagnose_unbalanced_split():
    issues = dict(diagnose(dblock_constraints(5, (2, 3))))
    assert "partition_balance" in issues


def test_diagnose_contradiction():
    cs = ConstraintSet(3, z_zero=[(0, 1)], fixed_entries={("Z", 0, 1): -1.0})
    assert diagnose(cs)[0][0] == "contradiction"


def test_stieltjes_w():
    cs = ConstraintSet(5, stieltjes_w=True)
    d = solve_design(Objective("custom_linear", cw=np.ones((5, 5)), cz=np.zeros((5, 5))), cs)
    off = d.W[~np.eye(5, dtype=bool)]
    assert np.all(off <= 0)


def test_n2_feasibility():
    d = solve_design("feasibility", n=2)
    assert validate(d).passed
    assert d.Z[0, 1] == pytest.approx(-2.0)


def test_eps_diagonal():
    d = solve_design("max_fiedler", ConstraintSet(4, eps=0.5))
    dz = np.diag(d.Z)
    assert np.ptp(dz) == 0 and 1.5 - 1e-9 <= dz[0] <= 2.5 + 1e-9


def test_custom_c():
    d = solve_design("min_znorm", ConstraintSet(4, c=1.0))
    lam = np.linalg.eigvalsh(d.W)
    assert lam[0] + lam[1] >= 1.0 - 1e-6


def test_min_row_nonzeros():
    d = solve_design("min_resistance", ConstraintSet(4, min_row_nonzeros_w=3))
    assert np.all(np.abs(d.W[~np.eye(4, dtype=bool)]) > 1e-6)


def test_constraint_json_roundtrip():
    cs = dblock_constraints(6, (3, 3), c=0.4)
    back = ConstraintSet.from_dict(cs.to_dict())
    assert back.effective_zeros() == cs.effective_zeros()
    assert back.digest() == cs.digest()


def test_bad_inputs():
    with pytest.raises(ValueError):
        Objective("nonsense")
    with pytest.raises(ValueError):
        ConstraintSet(3, eps=2.5)
    with pytest.raises(ValueError):
        dblock_constraints(4, (2, 1))


def test_sdp_has_handles():
    prob = build_design_sdp(Objective("max_fiedler"), ConstraintSet(3))
    assert {"Z", "W"} <= set(prob.handles)
    assert "SDPA" in prob.to_sdpa() or prob.to_sdpa().strip()
