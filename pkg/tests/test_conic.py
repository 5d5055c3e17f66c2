import numpy as np
import pytest

from splitforge.conic import ConicProblem, smat, svec_matrix


def test_lp_optimum():
    p = ConicProblem()
    x = p.vector(2)
    p.add_ge(x, 0.0)
    p.add_le(x[0] + 2 * x[1], 4.0)
    p.add_le(3 * x[0] + x[1], 6.0)
    p.maximize(x[0] + x[1])
    sol = p.solve()
    assert sol.status == "optimal"
    # vertex (8/5, 6/5)
    assert sol.objective == pytest.approx(2.8, abs=1e-7)
    assert np.allclose(sol[x], [1.6, 1.2], atol=1e-6)


def test_largest_eigenvalue_by_sdp():
    A = np.array([[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]])
    p = ConicProblem()
    t = p.scalar()
    p.add_psd(t * np.eye(3) - A)
    p.minimize(t)
    sol = p.solve()
    assert sol.ok
    assert sol[t] == pytest.approx(np.linalg.eigvalsh(A)[-1], abs=1e-7)


def test_psd_variable_nearest_trace():
    # min trace(X) s.t. X >= A (psd order) gives X = A for A psd
    A = np.array([[2.0, -1.0], [-1.0, 2.0]])
    p = ConicProblem()
    X = p.symmetric(2)
    p.add_psd(X - A)
    p.minimize(X.expr().trace())
    sol = p.solve()
    assert np.allclose(sol[X], A, atol=1e-6)


def test_infeasible_status():
    p = ConicProblem()
    x = p.scalar()
    p.add_ge(x, 1.0)
    p.add_le(x, 0.0)
    p.minimize(x)
    assert p.solve().status == "infeasible"


def test_unbounded_status():
    p = ConicProblem()
    x = p.scalar()
    p.minimize(x)
    p.add_le(x, 0.0)
    assert p.solve().status == "unbounded"


def test_svec_roundtrip():
    rng = np.random.default_rng(0)
    B = rng.standard_normal((4, 4))
    S = B + B.T
    s = svec_matrix(4) @ S.ravel()
    assert np.allclose(smat(s, 4), S)
    # the scaling preserves the Frobenius inner product
    C = rng.standard_normal((4, 4))
    C = C + C.T
    assert s @ (svec_matrix(4) @ C.ravel()) == pytest.approx(np.sum(S * C))


def test_nonsymmetric_psd_rejected():
    p = ConicProblem()
    x = p.vector(4)
    with pytest.raises(ValueError):
        p.add_psd(_square(x))


def _square(x):
    from splitforge.conic import bmat
    return bmat([[x[0], x[1]], [x[2], x[3]]])


def test_products_of_variables_rejected():
    p = ConicProblem()
    x = p.scalar()
    with pytest.raises(TypeError):
        x.expr() * x


def test_env_tolerance(monkeypatch):
    from splitforge.conic import solver_tolerance
    monkeypatch.setenv("SPLITFORGE_SOLVER_TOL", "1e-5")
    assert solver_tolerance() == 1e-5
    assert solver_tolerance(1e-9) == 1e-9
