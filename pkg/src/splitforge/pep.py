"""Performance-estimation SDPs: certified one-step contraction factors.

The d-form measures ``||z1 - z2||^2`` contraction of the M-lifted
iteration, the n-form measures ``||v1 - v2||^2`` contraction of the
W-iteration. Both dual problems are linear in the step size (or in
``W~ = gamma W``), so step sizes and W~ can be optimized directly.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .conic import ConicProblem, as_affine, bmat, psd_lambda_sum_device
from .design import Design, default_c
from .errors import EmptyClassError, SolverFailureError
from .factor import factor_eigen

GAMMA_MIN = 1e-3
FIEDLER_RETRY = 1e-8


@dataclass
class PEPCertificate:
    tau: float
    gamma: float
    phi: np.ndarray
    lam: np.ndarray
    omega: float | None = None
    w_tilde: np.ndarray | None = None
    primal_gap: float | None = None
    form: str = "d"
    status: str = "optimal"
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        fin = lambda a: [float(v) for v in a]
        return {"tau": self.tau, "gamma": self.gamma,
                "wTilde": None if self.w_tilde is None else self.w_tilde.tolist(),
                "phi": fin(self.phi), "lambda": fin(self.lam), "omega": self.omega,
                "primalGap": self.primal_gap}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _class_vectors(n, mu, lip):
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (n,)).copy()
    lip = np.broadcast_to(np.asarray(lip, dtype=float), (n,)).copy()
    if np.any(mu < 0):
        raise EmptyClassError("mu must be nonnegative")
    bad = np.flatnonzero(mu >= lip)
    if bad.size:
        i = int(bad[0])
        raise EmptyClassError(f"operator {i + 1}: mu={mu[i]} >= l={lip[i]} leaves an empty class")
    return mu, lip


# --------------------------------------------------------------------------
# K matrices
# --------------------------------------------------------------------------


def _sym(A):
    return (A + A.T) / 2


def k_matrices_d(M, L, mu, lip) -> dict:
    """Interpolation matrices on the Gram of ``[z; x]`` (size d + n)."""
    M = np.asarray(M, dtype=float)
    L = np.asarray(L, dtype=float)
    d, n = M.shape
    mu, lip = _class_vectors(n, mu, lip)
    N = d + n
    KI = np.zeros((N, N))
    KI[:d, :d] = np.eye(d)
    Kmu, Kl = [], []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        # constraint vector pieces: y_i = -M[:, i].z + L[i].x
        a_z = -M[:, i]
        a_x = L[i] - e
        K = np.zeros((N, N))
        K[:d, d:] = 0.5 * np.outer(a_z, e)
        K[d:, :d] = K[:d, d:].T
        K[d:, d:] = _sym(np.outer(e, L[i])) - (1 + mu[i]) * np.outer(e, e)
        Kmu.append(K)
        if math.isinf(lip[i]):
            Kl.append(None)
        else:
            a = np.concatenate([a_z, a_x])
            K = -np.outer(a, a)
            K[d + i, d + i] += lip[i] ** 2
            Kl.append(K)
    return {"KI": KI, "Kmu": Kmu, "Kl": Kl}


def k_matrices_n(L, mu, lip) -> dict:
    """Interpolation matrices on the Gram of ``[v; x]`` (size 2n)."""
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    mu, lip = _class_vectors(n, mu, lip)
    N = 2 * n
    KI = np.zeros((N, N))
    KI[:n, :n] = np.eye(n)
    K1 = np.zeros((N, N))
    K1[:n, :n] = 1.0
    Kmu, Kl = [], []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        K = np.zeros((N, N))
        K[:n, n:] = 0.5 * np.outer(e, e)
        K[n:, :n] = K[:n, n:].T
        K[n:, n:] = _sym(np.outer(e, L[i])) - (1 + mu[i]) * np.outer(e, e)
        Kmu.append(K)
        if math.isinf(lip[i]):
            Kl.append(None)
        else:
            a = np.concatenate([e, L[i] - e])
            K = -np.outer(a, a)
            K[n + i, n + i] += lip[i] ** 2
            Kl.append(K)
    return {"KI": KI, "K1": K1, "Kmu": Kmu, "Kl": Kl}


# --------------------------------------------------------------------------
# dual problems
# --------------------------------------------------------------------------


def _multiplier_block(prob, K):
    n = len(K["Kmu"])
    phi = prob.vector(n, "phi")
    prob.add_ge(phi, 0.0, name="phi_nonneg")
    fin = [i for i in range(n) if K["Kl"][i] is not None]
    lam = prob.vector(len(fin), "lambda") if fin else None
    if lam is not None:
        prob.add_ge(lam, 0.0, name="lambda_nonneg")
    psi = prob.scalar("psi")
    TL = psi * K["KI"]
    for i in range(n):
        TL = TL - phi[i] * K["Kmu"][i]
    for k, i in enumerate(fin):
        TL = TL - lam[k] * K["Kl"][i]
    return phi, lam, fin, psi, TL


def _finish(prob, sol, phi, lam, fin, psi, n, gamma, form, extra=None) -> PEPCertificate:
    if sol.status != "optimal":
        raise SolverFailureError(f"PEP dual returned {sol.status} ({sol.solver_status})")
    lam_full = np.zeros(n)
    if lam is not None:
        lam_full[fin] = np.maximum(sol[lam], 0.0)
    cert = PEPCertificate(max(float(sol[psi]), 0.0), float(gamma),
                          np.maximum(sol[phi], 0.0), lam_full, form=form)
    if sol.inaccurate:
        cert.notes.append("solver reached reduced accuracy only")
    if extra:
        extra(cert, sol)
    return cert


def _dual_d(M, L, mu, lip, gamma=None, gamma_min=GAMMA_MIN, tol=None):
    M = np.asarray(M, dtype=float)
    d, n = M.shape
    K = k_matrices_d(M, L, mu, lip)
    prob = ConicProblem("pep_dual_d")
    phi, lam, fin, psi, TL = _multiplier_block(prob, K)
    top = np.vstack([np.eye(d), np.zeros((n, d))])
    low = np.vstack([np.zeros((d, d)), M.T])
    if gamma is None:
        g = prob.scalar("gamma")
        prob.add_ge(g, gamma_min, name="gamma_min")
        B = top + g * low
    else:
        g = None
        B = as_affine(top + float(gamma) * low)
    prob.add_psd(bmat([[TL, B], [B.T, np.eye(d)]]), name="S")
    prob.minimize(psi)
    sol = prob.solve(tol=tol)
    gval = float(sol[g]) if g is not None and sol.status == "optimal" else gamma
    return _finish(prob, sol, phi, lam, fin, psi, n, gval if gval is not None else float("nan"), "d")


def pep_bound_d(M, L, gamma: float, mu=1.0, lip=2.0, tol=None) -> PEPCertificate:
    """Certified contraction factor of the d-iteration at a fixed step."""
    return _dual_d(M, L, mu, lip, gamma=gamma, tol=tol)


def pep_optimal_gamma_d(M, L, mu=1.0, lip=2.0, gamma_min: float = GAMMA_MIN, tol=None) -> PEPCertificate:
    """Step size minimizing the certified contraction factor of the d-iteration."""
    return _dual_d(M, L, mu, lip, gamma=None, gamma_min=gamma_min, tol=tol)


def null_basis(n: int) -> np.ndarray:
    """Orthonormal basis of the complement of the ones vector (n x (n-1))."""
    # leading singular vectors of the centering projector span 1-perp
    return np.linalg.svd(np.eye(n) - np.ones((n, n)) / n)[0][:, : n - 1]


def _reduce_n(K: dict, n: int) -> tuple[dict, np.ndarray]:
    """Restrict the n-form Gram to v in 1-perp: ``v = U u``."""
    U = null_basis(n)
    T = np.zeros((2 * n, 2 * n - 1))
    T[:n, : n - 1] = U
    T[n:, n - 1:] = np.eye(n)
    red = lambda A: None if A is None else T.T @ A @ T
    return {"KI": red(K["KI"]), "Kmu": [red(A) for A in K["Kmu"]],
            "Kl": [red(A) for A in K["Kl"]]}, T


def _dual_n(W, L, mu, lip, gamma=None, gamma_min=GAMMA_MIN, optimize_w=False, c=None,
            tol=None, reduced=True):
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    K = k_matrices_n(L, mu, lip)
    T = np.eye(2 * n)
    if reduced:
        K, T = _reduce_n(K, n)
    prob = ConicProblem("pep_dual_n")
    phi, lam, fin, psi, TL = _multiplier_block(prob, K)
    omega = None
    if not reduced:
        omega = prob.scalar("omega")
        TL = TL + omega * K["K1"]
    top = T.T @ np.vstack([np.eye(n), np.zeros((n, n))])
    low = T.T @ np.vstack([np.zeros((n, n)), np.eye(n)])
    g = Wt = None
    if optimize_w:
        Wt = prob.symmetric(n, "W_tilde")
        prob.add_eq(Wt @ np.ones(n), 0.0, name="wt_null")
        prob.add_psd(Wt, name="wt_psd")
        if c is not None:
            psd_lambda_sum_device(prob, Wt, n, c, tag="_wt")
        B = top - low @ Wt.expr()
    elif gamma is None:
        g = prob.scalar("gamma")
        prob.add_ge(g, gamma_min, name="gamma_min")
        B = top - g * (low @ np.asarray(W, dtype=float))
    else:
        B = as_affine(top - float(gamma) * (low @ np.asarray(W, dtype=float)))
    prob.add_psd(bmat([[TL, B], [B.T, np.eye(n)]]), name="S")
    prob.minimize(psi)
    sol = prob.solve(tol=tol)

    def extra(cert, sol):
        cert.omega = None if omega is None else float(sol[omega])
        if Wt is not None:
            Wv = sol[Wt]
            cert.w_tilde = (Wv + Wv.T) / 2
        if g is not None:
            cert.gamma = float(sol[g])
        if reduced:
            cert.notes.append("sum-zero condition on v eliminated by a basis of 1-perp")

    gval = 1.0 if optimize_w else (gamma if gamma is not None else float("nan"))
    return _finish(prob, sol, phi, lam, fin, psi, n, gval, "n", extra)


def pep_bound_n(W, L, gamma: float, mu=1.0, lip=2.0, tol=None, reduced: bool = True) -> PEPCertificate:
    """Certified contraction factor of the n-iteration with ``W~ = gamma W``.

    ``reduced=False`` keeps the free multiplier omega on the ones-block; that
    dual is not attained, so it only approaches the bound.
    """
    return _dual_n(W, L, mu, lip, gamma=gamma, tol=tol, reduced=reduced)


def pep_optimal_gamma_n(W, L, mu=1.0, lip=2.0, gamma_min: float = GAMMA_MIN, tol=None) -> PEPCertificate:
    return _dual_n(W, L, mu, lip, gamma=None, gamma_min=gamma_min, tol=tol)


def pep_optimal_W(L, mu=1.0, lip=2.0, c: float | None = None, tol=None) -> PEPCertificate:
    """Jointly optimal ``W~ = gamma W`` for a fixed L.

    The connectivity floor is only imposed when the unconstrained optimum
    has a vanishing Fiedler value.
    """
    n = np.asarray(L).shape[0]
    cert = _dual_n(None, L, mu, lip, optimize_w=True, tol=tol)
    lam = np.linalg.eigvalsh(cert.w_tilde)
    if lam[1] < FIEDLER_RETRY:
        c = default_c(n) if c is None else c
        cert = _dual_n(None, L, mu, lip, optimize_w=True, c=c, tol=tol)
        cert.notes.append(f"connectivity floor c={c:.6g} imposed")
    return cert


# --------------------------------------------------------------------------
# primal (tightness oracle)
# --------------------------------------------------------------------------


def pep_primal_d(M, L, gamma, mu=1.0, lip=2.0, tol=None) -> tuple[float, np.ndarray]:
    M = np.asarray(M, dtype=float)
    d, n = M.shape
    K = k_matrices_d(M, L, mu, lip)
    B = np.vstack([np.eye(d), gamma * M.T])
    KO = B @ B.T
    prob = ConicProblem("pep_primal_d")
    G = prob.symmetric(d + n, "G")
    prob.add_psd(G)
    for i in range(n):
        prob.add_ge(G.expr().vdot(K["Kmu"][i]), 0.0)
        if K["Kl"][i] is not None:
            prob.add_ge(G.expr().vdot(K["Kl"][i]), 0.0)
    prob.add_eq(G.expr().vdot(K["KI"]), 1.0)
    prob.maximize(G.expr().vdot(KO))
    sol = prob.solve(tol=tol)
    if sol.status != "optimal":
        raise SolverFailureError(f"PEP primal returned {sol.status}")
    return sol.objective, sol[G]


def pep_primal_n(W, L, gamma, mu=1.0, lip=2.0, tol=None, reduced: bool = True) -> tuple[float, np.ndarray]:
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    K = k_matrices_n(L, mu, lip)
    B = np.vstack([np.eye(n), -gamma * W])
    KO = B @ B.T
    K1 = K["K1"]
    T = np.eye(2 * n)
    if reduced:
        K, T = _reduce_n(K, n)
        KO = T.T @ KO @ T
    prob = ConicProblem("pep_primal_n")
    G = prob.symmetric(T.shape[1], "G")
    prob.add_psd(G)
    for i in range(n):
        prob.add_ge(G.expr().vdot(K["Kmu"][i]), 0.0)
        if K["Kl"][i] is not None:
            prob.add_ge(G.expr().vdot(K["Kl"][i]), 0.0)
    prob.add_eq(G.expr().vdot(K["KI"]), 1.0)
    if not reduced:
        prob.add_eq(G.expr().vdot(K1), 0.0)
    prob.maximize(G.expr().vdot(KO))
    sol = prob.solve(tol=tol)
    if sol.status != "optimal":
        raise SolverFailureError(f"PEP primal returned {sol.status}")
    # report the Gram in the original [v; x] coordinates
    return sol.objective, T @ sol[G] @ T.T


def design_M(design: Design) -> np.ndarray:
    """Minimal lifting for the d-form: the stored M when d = n - 1, else eigen."""
    if design.M is not None and design.M.shape[0] == design.n - 1:
        return design.M
    return factor_eigen(design.W)


def pep_primal_oracle(form: str, design: Design, gamma: float | None = None,
                      mu=1.0, lip=2.0, tol=None) -> float:
    """Primal PEP value (worst-case contraction) for a design."""
    gamma = design.gamma if gamma is None else gamma
    if form == "d":
        return pep_primal_d(design_M(design), design.L, gamma, mu, lip, tol)[0]
    if form == "n":
        return pep_primal_n(design.W, design.L, gamma, mu, lip, tol)[0]
    raise ValueError("form must be 'd' or 'n'")


def certify(design: Design, form: str = "d", gamma: float | None = None, mu=1.0, lip=2.0,
            optimize: str | None = None, with_primal: bool = False, tol=None) -> PEPCertificate:
    """Convenience front end used by the CLI and experiments.

    ``optimize`` is ``None``, ``'gamma'`` or ``'W'`` (n-form only).
    """
    gamma = design.gamma if gamma is None else gamma
    if form == "d":
        M = design_M(design)
        cert = (pep_optimal_gamma_d(M, design.L, mu, lip, tol=tol) if optimize == "gamma"
                else pep_bound_d(M, design.L, gamma, mu, lip, tol=tol))
        if with_primal:
            p = pep_primal_d(M, design.L, cert.gamma, mu, lip, tol)[0]
            cert.primal_gap = abs(p - cert.tau)
    elif form == "n":
        if optimize == "W":
            cert = pep_optimal_W(design.L, mu, lip, tol=tol)
        elif optimize == "gamma":
            cert = pep_optimal_gamma_n(design.W, design.L, mu, lip, tol=tol)
        else:
            cert = pep_bound_n(design.W, design.L, gamma, mu, lip, tol=tol)
        if with_primal:
            Wt = cert.w_tilde if cert.w_tilde is not None else design.W
            p = pep_primal_n(Wt, design.L, cert.gamma, mu, lip, tol)[0]
            cert.primal_gap = abs(p - cert.tau)
    else:
        raise ValueError("form must be 'd' or 'n'")
    return cert
