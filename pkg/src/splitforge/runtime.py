"""Running designed splittings against resolvent oracles."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .design import Design
from .errors import ArityError, DiagonalScalingError, DivergenceError, EmptyClassError
from .factor import factor_eigen

DIVERGENCE = 1e12
CONSENSUS_TOL = 1e-6
RESIDUAL_TARGET = 1e-10
MAX_ITERS = 10_000


# --------------------------------------------------------------------------
# oracles
# --------------------------------------------------------------------------


class ResolventOracle:
    """Resolvent ``J_{alpha A}`` of a maximal monotone operator on R^m."""

    mu: float = 0.0
    lip: float = math.inf
    dim: int = 1

    def evaluate(self, alpha: float, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def forward(self, x: np.ndarray) -> np.ndarray | None:
        """``A(x)`` when single valued, else ``None``."""
        return None

    def residual(self, x: np.ndarray, u: np.ndarray) -> float:
        """Distance from ``u`` to ``A(x)`` (inf when x is outside the domain)."""
        Ax = self.forward(x)
        if Ax is None:
            raise NotImplementedError
        return float(np.linalg.norm(u - Ax))

    def spot_check(self, rng=None, trials: int = 20, tol: float = 1e-9) -> bool:
        """Firm nonexpansiveness of ``J_A`` on random pairs."""
        rng = np.random.default_rng(0) if rng is None else rng
        for _ in range(trials):
            u, v = rng.standard_normal(self.dim), rng.standard_normal(self.dim)
            du = self.evaluate(1.0, u) - self.evaluate(1.0, v)
            if du @ du > du @ (u - v) + tol:
                return False
        return True


class AffineOracle(ResolventOracle):
    """``A(x) = Q x + b`` with ``Q + Q^T`` positive semidefinite."""

    def __init__(self, Q, b=None, mu: float | None = None, lip: float | None = None):
        self.Q = np.atleast_2d(np.asarray(Q, dtype=float))
        self.dim = self.Q.shape[0]
        self.b = np.zeros(self.dim) if b is None else np.asarray(b, dtype=float).ravel()
        S = (self.Q + self.Q.T) / 2
        self.mu = float(np.linalg.eigvalsh(S)[0]) if mu is None else float(mu)
        self.lip = float(np.linalg.norm(self.Q, 2)) if lip is None else float(lip)
        self._cache: dict = {}

    def evaluate(self, alpha, y):
        key = float(alpha)
        if key not in self._cache:
            self._cache[key] = np.linalg.inv(np.eye(self.dim) + key * self.Q)
        return self._cache[key] @ (np.asarray(y, dtype=float) - key * self.b)

    def forward(self, x):
        return self.Q @ x + self.b


class ZeroOracle(ResolventOracle):
    def __init__(self, dim: int = 1):
        self.dim = dim
        self.mu, self.lip = 0.0, 0.0

    def evaluate(self, alpha, y):
        return np.array(y, dtype=float)

    def forward(self, x):
        return np.zeros(self.dim)


class PointOracle(ResolventOracle):
    """Normal cone of the singleton ``{a}``: the resolvent returns ``a``."""

    def __init__(self, a):
        self.a = np.atleast_1d(np.asarray(a, dtype=float))
        self.dim = self.a.size

    def evaluate(self, alpha, y):
        return self.a.copy()

    def residual(self, x, u):
        return 0.0 if np.linalg.norm(x - self.a) < 1e-8 else math.inf


class HyperplaneOracle(ResolventOracle):
    """Normal cone of ``{x : a.x = beta}``; the resolvent is the projection."""

    def __init__(self, a, beta: float):
        self.a = np.asarray(a, dtype=float).ravel()
        self.beta = float(beta)
        self.dim = self.a.size

    def evaluate(self, alpha, y):
        y = np.asarray(y, dtype=float)
        return y - (self.a @ y - self.beta) / (self.a @ self.a) * self.a

    def residual(self, x, u):
        if abs(self.a @ x - self.beta) > 1e-6 * (1 + abs(self.beta)):
            return math.inf
        ah = self.a / np.linalg.norm(self.a)
        return float(np.linalg.norm(u - (u @ ah) * ah))


def random_affine(mu: float, lip: float, dim: int, rng) -> AffineOracle:
    """Random ``Q = mu I + t (N + S)`` with ``lambda_min(sym Q) = mu`` and ``||Q|| = lip``."""
    if not (0 <= mu < lip):
        raise EmptyClassError(f"need 0 <= mu < lip, got mu={mu}, lip={lip}")
    b = rng.standard_normal(dim)
    if dim == 1:
        return AffineOracle([[lip]], b, mu=mu, lip=lip)
    B = rng.standard_normal((dim, dim - 1))
    N = B @ B.T
    A = rng.standard_normal((dim, dim))
    K = N / np.linalg.norm(N, 2) + (A - A.T) / np.linalg.norm(A - A.T, 2)
    if math.isinf(lip):
        return AffineOracle(mu * np.eye(dim) + 3.0 * K, b, mu=mu, lip=math.inf)
    f = lambda t: np.linalg.norm(mu * np.eye(dim) + t * K, 2) - lip
    hi = 1.0
    while f(hi) < 0:
        hi *= 2
    t = brentq(f, 0.0, hi, xtol=1e-14, rtol=1e-15)
    return AffineOracle(mu * np.eye(dim) + t * K, b, mu=mu, lip=lip)


def make_instance(kind: str, n: int, mu: float = 1.0, lip: float = 2.0, dim: int = 2,
                  seed: int = 0, unrestricted_position: str = "last") -> list[ResolventOracle]:
    """Synthetic operator families.

    ``class1`` gives n affine operators with exact (mu, lip). ``class2``
    replaces one of them by the normal cone of a random hyperplane, placed
    first or last.
    """
    rng = np.random.default_rng(seed)
    if kind == "class1":
        return [random_affine(mu, lip, dim, rng) for _ in range(n)]
    if kind == "class2":
        ops = [random_affine(mu, lip, dim, rng) for _ in range(n - 1)]
        unr = HyperplaneOracle(rng.standard_normal(dim), float(rng.standard_normal()))
        if unrestricted_position == "first":
            return [unr] + ops
        if unrestricted_position == "last":
            return ops + [unr]
        raise ValueError("unrestricted_position must be 'first' or 'last'")
    raise ValueError(f"unknown instance class {kind!r}")


def reference_solution(oracles) -> np.ndarray:
    """Zero of the sum for affine and hyperplane oracles (direct KKT solve)."""
    m = oracles[0].dim
    Q, b, cons = np.zeros((m, m)), np.zeros(m), []
    for o in oracles:
        if isinstance(o, AffineOracle):
            Q += o.Q
            b += o.b
        elif isinstance(o, HyperplaneOracle):
            cons.append((o.a, o.beta))
        elif isinstance(o, ZeroOracle):
            continue
        else:
            raise TypeError(f"no direct solve for {type(o).__name__}")
    k = len(cons)
    K = np.zeros((m + k, m + k))
    K[:m, :m] = Q
    rhs = np.concatenate([-b, np.zeros(k)])
    for r, (a, beta) in enumerate(cons):
        K[:m, m + r] = a
        K[m + r, :m] = a
        rhs[m + r] = beta
    return np.linalg.solve(K, rhs)[:m]


# --------------------------------------------------------------------------
# iterations
# --------------------------------------------------------------------------


def solve_inner(L, inputs, oracles) -> np.ndarray:
    """``x_i = J_{A_i}(input_i + sum_{j<=i} L_ij x_j)`` in one forward sweep."""
    L = np.asarray(L, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    n = L.shape[0]
    if len(oracles) != n or inputs.shape[0] != n:
        raise ArityError(f"design has {n} operators, got {len(oracles)} oracles / {inputs.shape[0]} inputs")
    x = np.zeros_like(inputs)
    for i in range(n):
        if L[i, i] >= 1.0:
            raise DiagonalScalingError(f"L[{i + 1},{i + 1}] = {L[i, i]} >= 1")
        acc = inputs[i].copy()
        for j in range(i):
            if L[i, j] != 0.0:
                acc = acc + L[i, j] * x[j]
        scale = 1.0 / (1.0 - L[i, i])
        x[i] = oracles[i].evaluate(scale, scale * acc)
    return x


def _weighted_sum(A, X) -> np.ndarray:
    """``A @ X`` with contributions summed in ascending column order."""
    out = np.zeros((A.shape[0],) + X.shape[1:])
    for j in range(A.shape[1]):
        col = A[:, j]
        if np.any(col):
            out += np.outer(col, X[j]).reshape(out.shape)
    return out


@dataclass
class RunTrace:
    residuals: list = field(default_factory=list)
    consensus_gaps: list = field(default_factory=list)
    xbar: list = field(default_factory=list)
    state: np.ndarray | None = None
    x: np.ndarray | None = None
    xs: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.residuals)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        m = len(self.xbar[0]) if self.xbar else 0
        w.writerow(["iter", "residual", "consensus_gap"] + [f"xbar_{k + 1}" for k in range(m)])
        for k, (r, g) in enumerate(zip(self.residuals, self.consensus_gaps)):
            row = [k + 1, repr(float(r)), repr(float(g))]
            if self.xbar:
                row += [repr(float(v)) for v in self.xbar[k]]
            w.writerow(row)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _consensus(x):
    xb = x.mean(axis=0)
    return xb, float(np.max(np.linalg.norm(x - xb, axis=1)))


def _run(step, state, max_iters, residual_target, consensus_tol, record_xbar, keep_x):
    tr = RunTrace()
    for k in range(max_iters):
        new, x = step(state)
        res = float(np.linalg.norm(new - state))
        if not np.isfinite(res) or res > DIVERGENCE:
            raise DivergenceError(f"residual {res:.3e} at iteration {k + 1}", k + 1)
        xb, gap = _consensus(x)
        tr.residuals.append(res)
        tr.consensus_gaps.append(gap)
        if record_xbar:
            tr.xbar.append(xb.copy())
        if keep_x:
            tr.xs.append(x.copy())
        state = new
        tr.x = x
        if res <= residual_target and gap <= consensus_tol:
            tr.converged = True
            break
    tr.state = state
    return tr


def _as_states(a, rows):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.shape[0] != rows:
        raise ArityError(f"state has {a.shape[0]} rows, expected {rows}")
    return a


def run_d_iteration(design: Design, oracles, z0, max_iters: int = MAX_ITERS,
                    residual_target: float = RESIDUAL_TARGET, consensus_tol: float = CONSENSUS_TOL,
                    record_xbar: bool = False, keep_x: bool = False, M=None) -> RunTrace:
    """``x = J_A(-M^T z + L x)``, ``z <- z + gamma M x``."""
    M = design.M if M is None else np.asarray(M, dtype=float)
    if M is None:
        M = factor_eigen(design.W)
    L, g = design.L, design.gamma
    z = _as_states(z0, M.shape[0])

    def step(z):
        x = solve_inner(L, -_weighted_sum(M.T, z), oracles)
        return z + g * _weighted_sum(M, x), x

    return _run(step, z, max_iters, residual_target, consensus_tol, record_xbar, keep_x)


def run_n_iteration(design: Design, oracles, v0, max_iters: int = MAX_ITERS,
                    residual_target: float = RESIDUAL_TARGET, consensus_tol: float = CONSENSUS_TOL,
                    record_xbar: bool = False, keep_x: bool = False) -> RunTrace:
    """``x = J_A(v + L x)``, ``v <- v - gamma W x``. v0 is projected to sum zero."""
    L, W, g = design.L, design.W, design.gamma
    v = _as_states(v0, design.n)
    v = v - v.mean(axis=0)

    def step(v):
        x = solve_inner(L, v, oracles)
        return v - g * _weighted_sum(W, x), x

    return _run(step, v, max_iters, residual_target, consensus_tol, record_xbar, keep_x)


# --------------------------------------------------------------------------
# duals
# --------------------------------------------------------------------------


def extract_attouch_thera_dual(v_star, x_star, L) -> np.ndarray:
    """``u = v + (L - I) x``; row i is the dual element for operator i."""
    L = np.asarray(L, dtype=float)
    x = np.asarray(x_star, dtype=float)
    return np.asarray(v_star, dtype=float) + (L - np.eye(L.shape[0])) @ x


def warm_start_v(u, x, L) -> np.ndarray:
    """Inverse map of :func:`extract_attouch_thera_dual`."""
    L = np.asarray(L, dtype=float)
    return np.asarray(u, dtype=float) + (np.eye(L.shape[0]) - L) @ np.asarray(x, dtype=float)


def extract_lagrangian_dual(z_star, x_star, M, L) -> np.ndarray:
    """``u = z - (M^T)^+ (L - I) x`` for a minimal lifting (d = n - 1)."""
    M = np.asarray(M, dtype=float)
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    if M.shape[0] != n - 1:
        raise ArityError(f"Lagrangian dual needs d = n - 1 = {n - 1}, got d = {M.shape[0]}")
    rhs = (L - np.eye(n)) @ np.asarray(x_star, dtype=float)
    return np.asarray(z_star, dtype=float) - np.linalg.pinv(M.T) @ rhs
