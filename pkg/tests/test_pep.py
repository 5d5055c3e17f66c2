import numpy as np
import pytest

from splitforge import certify, preset
from splitforge.errors import EmptyClassError
from splitforge.pep import pep_bound_n, pep_primal_oracle

# Douglas-Rachford on (1, 2) operators has closed-form rates
DR_TAU = {0.5: 36 / 49, 1.0: 25 / 49}


@pytest.mark.parametrize("gamma", sorted(DR_TAU))
def test_dr_closed_form(gamma):
    d = preset("dr", 2)
    assert certify(d, "d", gamma=gamma).tau == pytest.approx(DR_TAU[gamma], abs=1e-6)
    assert certify(d, "n", gamma=gamma).tau == pytest.approx(DR_TAU[gamma], abs=1e-6)


def test_dr_tuned():
    c = certify(preset("dr", 2), "d", optimize="gamma")
    assert c.tau == pytest.approx(9 / 49, abs=1e-6)
    assert c.gamma == pytest.approx(2.0, abs=1e-4)


# frozen values at gamma = 0.5, mu = 1, l = 2
FROZEN = [("ryu", 3, 0.82120995), ("mt", 3, 0.83496091),
          ("fully_connected", 4, 0.62249480), ("two_block_fiedler", 4, 0.67408444)]


@pytest.mark.parametrize("name,n,tau", FROZEN)
def test_frozen_d_form(name, n, tau):
    assert certify(preset(name, n), "d", gamma=0.5).tau == pytest.approx(tau, abs=1e-6)


def test_two_block_tuned():
    c = certify(preset("two_block_fiedler", 4), "d", optimize="gamma")
    assert c.tau == pytest.approx(3 / 7, abs=1e-6)


@pytest.mark.parametrize("form", ["d", "n"])
def test_primal_matches_dual(form):
    d = preset("mt", 4)
    c = certify(d, form, gamma=0.5, with_primal=True)
    assert c.primal_gap <= 1e-5
    assert pep_primal_oracle(form, d, 0.5) == pytest.approx(c.tau, abs=1e-5)


def test_scale_identity():
    d = preset("mt", 4)
    a = pep_bound_n(d.W, d.L, 0.5).tau
    b = pep_bound_n(3 * d.W, d.L, 0.5 / 3).tau
    assert a == pytest.approx(b, abs=1e-6)


def test_optimal_w_not_worse():
    d = preset("mt", 4)
    base = certify(d, "n", gamma=0.5).tau
    opt = certify(d, "n", optimize="W")
    assert opt.tau <= base + 1e-6
    assert opt.w_tilde is not None and np.allclose(opt.w_tilde @ np.ones(4), 0, atol=1e-6)


def test_class2_unrestricted():
    d = preset("mt", 4)
    c = certify(d, "d", optimize="gamma", mu=[1, 1, 1, 0], lip=[2, 2, 2, np.inf])
    assert 0 < c.tau < 1


def test_empty_class():
    with pytest.raises(EmptyClassError):
        certify(preset("dr", 2), "d", mu=2.0, lip=1.0)


def test_certificate_json():
    c = certify(preset("dr", 2), "d", gamma=0.5)
    obj = c.to_dict()
    assert set(obj) >= {"tau", "gamma", "phi", "lambda", "omega", "primalGap"}
