import math

import numpy as np
import pytest

from splitforge import Design, default_c, graph_stats, load_design, max_gamma, preset, save_design, validate
from splitforge.design import PRESETS, extract_L
from splitforge.errors import DiagonalScalingError, MalformedZError, PresetArityError
from splitforge.experiments import cluster_design


@pytest.mark.parametrize("name,n,d", [("dr", 2, None), ("ryu", 3, None), ("ryu_ext", 5, None),
                                      ("mt", 5, None), ("fully_connected", 5, None),
                                      ("two_block_fiedler", 6, None), ("dblock_mt", 6, 3),
                                      ("dblock_mt", 6, 2)])
def test_presets_valid(name, n, d):
    rep = validate(preset(name, n, d=d), tol=1e-8)
    assert rep.passed, rep.summary()


def test_preset_matrices():
    dr = preset("dr", 2)
    assert np.array_equal(dr.Z, [[2, -2], [-2, 2]])
    assert np.array_equal(dr.L, [[0, 0], [2, 0]])
    mt = preset("mt", 4)
    assert np.allclose(mt.W, [[1, -1, 0, 0], [-1, 2, -1, 0], [0, -1, 2, -1], [0, 0, -1, 1]])
    assert np.allclose(mt.M.T @ mt.M, mt.W)
    ryu = preset("ryu", 3)
    assert np.allclose(ryu.L, [[0, 0, 0], [1, 0, 0], [1, 1, 0]])
    tb = preset("two_block_fiedler", 4)
    assert np.allclose(tb.Z[:2, 2:], -1.0)
    assert np.allclose(np.linalg.eigvalsh(tb.W)[1], 2.0)


def test_preset_arity():
    with pytest.raises(PresetArityError):
        preset("dr", 3)
    with pytest.raises(PresetArityError):
        preset("two_block_fiedler", 5)
    with pytest.raises(PresetArityError):
        preset("dblock_mt", 7, d=3)
    with pytest.raises(ValueError):
        preset("nope", 3)
    assert "mt" in PRESETS


def test_default_c():
    assert default_c(2) == pytest.approx(2.0)
    assert default_c(4) == pytest.approx(2 - math.sqrt(2))
    # the unweighted path attains the floor
    assert np.linalg.eigvalsh(preset("mt", 6).W)[1] == pytest.approx(default_c(6))


def test_max_gamma():
    assert max_gamma(preset("dr", 2).W) == pytest.approx(1.0)
    assert max_gamma(preset("dr", 2).W, mu=1.0) == pytest.approx(2.0)
    assert max_gamma(preset("mt", 4).W) == pytest.approx(1.0)


def test_graph_stats_examples():
    s = graph_stats(preset("mt", 4).W)
    assert s.edge_count == 3
    assert s.fiedler == pytest.approx(2 - math.sqrt(2))
    assert s.total_resistance == pytest.approx(0.625)
    assert s.slem == pytest.approx(math.sqrt(0.5))
    f = graph_stats(preset("fully_connected", 4).Z)
    assert f.edge_count == 6
    assert f.fiedler == pytest.approx(8 / 3)
    assert f.slem == pytest.approx(1 / 3)


def test_json_roundtrip(tmp_path):
    d = preset("dblock_mt", 6, d=3, gamma=0.7)
    path = tmp_path / "d.json"
    save_design(d, path)
    e = load_design(path)
    assert e.n == 6 and e.gamma == 0.7
    for k in ("Z", "W", "L"):
        assert np.max(np.abs(getattr(e, k) - getattr(d, k))) <= 1e-12
    assert e.meta["d"] == 3
    assert e.digest() == d.digest()


def test_json_with_m_roundtrip():
    d = preset("mt", 5)
    e = Design.from_json(d.to_json())
    assert np.max(np.abs(e.M - d.M)) <= 1e-12
    assert e.d == 4


def test_json_bad_d():
    obj = preset("mt", 3).to_dict()
    obj["d"] = 5
    with pytest.raises(ValueError):
        Design.from_dict(obj)


def test_extract_L_errors():
    with pytest.raises(MalformedZError):
        extract_L(np.diag([2.0, 1.0]))
    with pytest.raises(DiagonalScalingError):
        extract_L(np.diag([5.0, 5.0]))


def test_validate_reports_every_failure():
    Z = 2 * np.eye(4)
    Z[0, 1] = Z[1, 0] = -2
    Z[2, 3] = Z[3, 2] = -2
    W = Z.copy()
    rep = validate(Design(4, Z, W))
    failed = {c.name for c in rep.failures()}
    assert {"w_connected", "z_connected", "fiedler_floor", "z_min_degree"} <= failed
    assert "w_null" not in failed


def test_cluster_matrices():
    d = cluster_design()
    assert validate(d, tol=0.05).passed
    assert not validate(d, tol=1e-8).passed
    assert d.W[0, 3] != 0 and d.Z[0, 3] != 0


def test_partition_balance_detects_bad_split():
    # (1,2)-Block on 3 nodes: the single Z edge pattern cannot balance
    Z = np.array([[2.0, -1, -1], [-1, 2, -1], [-1, -1, 2]])
    Z[1, 2] = Z[2, 1] = 0.0
    Z[1, 1] = Z[2, 2] = 2.0
    d = Design(3, Z, preset("fully_connected", 3).W)
    rep = validate(d)
    assert not rep["partition_balance"].passed
