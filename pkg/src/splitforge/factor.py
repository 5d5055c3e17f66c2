"""Factorizations ``W = M^T M`` and minimal-lifting reduction of states."""
from __future__ import annotations

import numpy as np

from .errors import IncompatibleFactorError, NotStieltjesError, RankDeficiencyError

PIVOT_REL = 1e-9
STIELTJES_ZERO = 1e-6


def factor_stieltjes(W, zero_threshold: float = STIELTJES_ZERO) -> np.ndarray:
    """One row per edge: ``sqrt(-W_ij) * (e_j - e_i)``.

    Edges are the strict upper-triangle nonzeros in row-major order, so
    ``d`` equals the edge count.
    """
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    rows = []
    for i in range(n):
        for j in range(i + 1, n):
            w = W[i, j]
            if w > zero_threshold:
                raise NotStieltjesError(f"positive off-diagonal entry W[{i + 1},{j + 1}] = {w:.6g}")
            if w < -zero_threshold:
                r = np.zeros(n)
                r[i], r[j] = -np.sqrt(-w), np.sqrt(-w)
                rows.append(r)
    return np.array(rows).reshape(len(rows), n)


def ldl(W, threshold: float):
    """Plain ``P L D L^T P^T`` with symmetric pivoting only past near-zero pivots.

    Returns ``(perm, Lfac, D)`` with ``W[perm][:, perm] = Lfac diag(D) Lfac^T``.
    """
    A = np.array(W, dtype=float)
    n = A.shape[0]
    perm = np.arange(n)
    Lf = np.eye(n)
    D = np.zeros(n)
    for k in range(n):
        if abs(A[k, k]) <= threshold and k < n - 1:
            rest = k + int(np.argmax(np.abs(np.diag(A)[k:])))
            if abs(A[rest, rest]) > threshold:
                # swap rows/columns k and rest in the active block and history
                A[[k, rest]] = A[[rest, k]]
                A[:, [k, rest]] = A[:, [rest, k]]
                Lf[[k, rest], :k] = Lf[[rest, k], :k]
                perm[[k, rest]] = perm[[rest, k]]
        D[k] = A[k, k]
        if abs(D[k]) > threshold:
            col = A[k + 1:, k] / D[k]
            Lf[k + 1:, k] = col
            A[k + 1:, k + 1:] -= np.outer(col, A[k, k + 1:])
        A[k + 1:, k] = 0.0
        A[k, k + 1:] = 0.0
    return perm, Lf, D


def factor_cholesky(W) -> np.ndarray:
    """``M = D~^{1/2} B~^T`` from an LDL^T factorization, zero pivot dropped."""
    W = np.asarray(W, dtype=float)
    thr = PIVOT_REL * max(np.linalg.norm(W, 2), 1e-300)
    perm, Lf, D = ldl(W, thr)
    small = np.flatnonzero(D <= thr)
    if small.size != 1:
        raise RankDeficiencyError(f"expected one zero pivot, found {small.size}")
    keep = np.setdiff1d(np.arange(len(D)), small)
    B = np.zeros_like(Lf)
    B[perm] = Lf
    return np.sqrt(D[keep])[:, None] * B[:, keep].T


def factor_eigen(W) -> np.ndarray:
    """``M = Lambda~^{1/2} U~^T`` with the eigenvector closest to 1 removed."""
    W = np.asarray(W, dtype=float)
    W = (W + W.T) / 2
    n = W.shape[0]
    lam, U = np.linalg.eigh(W)
    align = np.abs(U.T @ np.ones(n)) / np.sqrt(n)
    drop = int(np.argmax(align))
    keep = [k for k in range(n) if k != drop]
    thr = PIVOT_REL * max(np.linalg.norm(W, 2), 1e-300)
    if np.any(lam[keep] <= thr):
        raise RankDeficiencyError("W has more than one zero eigenvalue")
    return np.sqrt(lam[keep])[:, None] * U[:, keep].T


def reduce_initial_point(M, M_tilde, z0, tol: float = 1e-8) -> np.ndarray:
    """State ``z~0`` for ``M~`` producing the same ``M^T z0`` (rows are nodes)."""
    M = np.asarray(M, dtype=float)
    Mt = np.asarray(M_tilde, dtype=float)
    G, Gt = M.T @ M, Mt.T @ Mt
    if G.shape != Gt.shape or np.max(np.abs(G - Gt)) > tol * max(1.0, np.abs(G).max()) * 10:
        raise IncompatibleFactorError("M^T M and M~^T M~ differ")
    z0 = np.asarray(z0, dtype=float)
    vec = z0.ndim == 1
    Z0 = z0[:, None] if vec else z0
    rhs = M.T @ Z0
    zt, *_ = np.linalg.lstsq(Mt.T, rhs, rcond=None)
    return zt[:, 0] if vec else zt
