"""Splitting designs: the (n, Z, W, L, gamma, M) bundle, checks and presets."""
from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import DegenerateDesignError, DiagonalScalingError, MalformedZError, PresetArityError

VALIDATE_TOL = 1e-6
PRESET_TOL = 1e-8
ZERO_THRESHOLD = 1e-6
PARTITION_CHECK_MAX_N = 12
DEFAULT_GAMMA = 0.5


def default_c(n: int) -> float:
    """Smallest Fiedler value of a connected graph on n nodes with unit scale."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return 2.0 * (1.0 - math.cos(math.pi / n))


def extract_L(Z, tol: float = VALIDATE_TOL) -> np.ndarray:
    """Lower-triangular L with ``Z = 2 I - L - L^T``.

    Examples
    --------
    >>> extract_L([[2, -2], [-2, 2]])
    array([[0., 0.],
           [2., 0.]])
    """
    Z = np.asarray(Z, dtype=float)
    d = np.diag(Z)
    if np.max(np.abs(d - d[0])) > tol:
        raise MalformedZError(f"diagonal of Z is not constant (spread {np.ptp(d):.3e})")
    if not 0.0 < d[0] < 4.0:
        raise DiagonalScalingError(f"Z_11 = {d[0]:.6g} outside (0, 4)")
    L = -np.tril(Z, -1) + 0.0
    np.fill_diagonal(L, (2.0 - d[0]) / 2.0)
    return L


def max_gamma(W, mu: float = 0.0) -> float:
    """Upper end of the admissible step size range, ``1 + 2 mu / ||W||``."""
    W = np.asarray(W, dtype=float)
    nrm = np.linalg.norm(W, 2)
    if nrm == 0.0:
        raise DegenerateDesignError("W is zero")
    return 1.0 + 2.0 * float(mu) / nrm


# --------------------------------------------------------------------------
# graph helpers
# --------------------------------------------------------------------------


def edges_of(K, zero_threshold: float = ZERO_THRESHOLD) -> list[tuple[int, int]]:
    """Off-diagonal support as ``(i, j)`` pairs with ``i < j`` (0-based)."""
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    return [(i, j) for i in range(n) for j in range(i + 1, n)
            if abs(K[i, j]) > zero_threshold or abs(K[j, i]) > zero_threshold]


def is_connected(n: int, edges) -> bool:
    A = np.zeros((n, n))
    for i, j in edges:
        A[i, j] = A[j, i] = 1
    return connected_components(A, directed=False)[0] == 1


def degrees(n: int, edges) -> np.ndarray:
    deg = np.zeros(n, dtype=int)
    for i, j in edges:
        deg[i] += 1
        deg[j] += 1
    return deg


def partition_violation(n: int, edges) -> tuple[frozenset, float] | None:
    """Worst two-partition breaking ``||S|-|S^c|| <= 2(|E_S|+|E_S^c|)``.

    Returns ``(S, excess)`` for the largest excess, or ``None``.
    Each proper partition is visited once, with the last node in the complement.
    """
    edges = list(edges)
    worst = None
    for mask in range(1, 2 ** (n - 1)):
        inside = [(mask >> i) & 1 for i in range(n - 1)] + [0]
        # node n-1 always in the complement; mask==0 would be trivial
        size_s = sum(inside)
        internal = sum(1 for i, j in edges if inside[i] == inside[j])
        excess = abs(2 * size_s - n) - 2 * internal
        if excess > 0 and (worst is None or excess > worst[1]):
            worst = (frozenset(i for i in range(n) if inside[i]), float(excess))
    return worst


@dataclass(frozen=True)
class GraphStats:
    fiedler: float
    slem: float
    total_resistance: float
    edge_count: int


def graph_stats(K, eps: float = 0.0, zero_threshold: float = ZERO_THRESHOLD) -> GraphStats:
    """Spectral summary of a Laplacian-like matrix."""
    K = np.asarray(K, dtype=float)
    K = (K + K.T) / 2
    n = K.shape[0]
    lam = np.linalg.eigvalsh(K)
    fiedler = float(lam[1]) if n > 1 else 0.0
    P = np.eye(n) - K / (2.0 + eps) - np.ones((n, n)) / n
    slem = float(np.max(np.abs(np.linalg.eigvalsh(P))))
    pos = lam[lam > zero_threshold]
    if pos.size < n - 1:
        resistance = math.inf
    else:
        resistance = float(np.sum(1.0 / np.sort(lam)[1:])) / n
    return GraphStats(max(fiedler, 0.0) if abs(fiedler) < 1e-12 else fiedler, slem,
                      resistance, len(edges_of(K, zero_threshold)))


# --------------------------------------------------------------------------
# design type
# --------------------------------------------------------------------------


def _as_matrix(x, n=None):
    a = np.array(x, dtype=float)
    if a.ndim != 2 or (n is not None and a.shape[1] != n):
        raise ValueError(f"bad matrix shape {a.shape}")
    return a


@dataclass
class Design:
    """One frugal resolvent splitting: ``n`` operators, matrices Z, W, L."""

    n: int
    Z: np.ndarray
    W: np.ndarray
    gamma: float = DEFAULT_GAMMA
    M: np.ndarray | None = None
    meta: dict = field(default_factory=dict)
    L: np.ndarray | None = None

    def __post_init__(self):
        self.Z = _as_matrix(self.Z, self.n)
        self.W = _as_matrix(self.W, self.n)
        if self.Z.shape != (self.n, self.n) or self.W.shape != (self.n, self.n):
            raise ValueError("Z and W must be n x n")
        if self.M is not None:
            self.M = _as_matrix(self.M, self.n)
        if self.L is None:
            try:
                self.L = extract_L(self.Z, tol=max(VALIDATE_TOL, self.meta.get("tol", 0.0)))
            except (MalformedZError, DiagonalScalingError):
                # left undefined; validate() reports the offending check
                self.L = None
        else:
            self.L = _as_matrix(self.L, self.n)

    @property
    def d(self) -> int | None:
        return None if self.M is None else self.M.shape[0]

    @property
    def eps(self) -> float:
        return float(self.meta.get("eps", 0.0))

    @property
    def c(self) -> float:
        return float(self.meta.get("c", default_c(self.n)))

    def with_gamma(self, gamma: float) -> "Design":
        return Design(self.n, self.Z.copy(), self.W.copy(), float(gamma),
                      None if self.M is None else self.M.copy(), dict(self.meta),
                      None if self.L is None else self.L.copy())

    def digest(self) -> str:
        payload = {k: np.round(getattr(self, k), 9).tolist() for k in ("Z", "W")}
        payload["n"] = self.n
        payload["gamma"] = round(self.gamma, 9)
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        out = {"n": self.n, "gamma": self.gamma, "Z": self.Z.tolist(), "W": self.W.tolist()}
        if self.L is not None:
            out["L"] = self.L.tolist()
        if self.M is not None:
            out["M"] = self.M.tolist()
            out["d"] = int(self.M.shape[0])
        out["meta"] = self.meta
        return out

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, obj: dict) -> "Design":
        try:
            n = int(obj["n"])
            Z, W = obj["Z"], obj["W"]
        except KeyError as exc:
            raise ValueError(f"design JSON missing field {exc}") from None
        M = obj.get("M")
        if M is not None and "d" in obj and len(M) != int(obj["d"]):
            raise ValueError("field d does not match the number of rows of M")
        return cls(n, Z, W, float(obj.get("gamma", DEFAULT_GAMMA)), M, dict(obj.get("meta", {})),
                   obj.get("L"))

    @classmethod
    def from_json(cls, text: str) -> "Design":
        return cls.from_dict(json.loads(text))


def save_design(design: Design, path) -> None:
    with open(path, "w") as fh:
        fh.write(design.to_json())


def load_design(path) -> Design:
    with open(path) as fh:
        return Design.from_json(fh.read())


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    residual: float
    tol: float
    skipped: bool = False
    note: str = ""


@dataclass
class ValidityReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if not c.skipped)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed and not c.skipped]

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            flag = "skip" if c.skipped else ("ok" if c.passed else "FAIL")
            lines.append(f"{flag:4s} {c.name:18s} residual={c.residual:.3e} tol={c.tol:.1e} {c.note}".rstrip())
        return "\n".join(lines)


def _lam_min(A) -> float:
    return float(np.linalg.eigvalsh((A + A.T) / 2)[0])


def validate(design: Design, tol: float = VALIDATE_TOL,
             zero_threshold: float = ZERO_THRESHOLD) -> ValidityReport:
    """Check a design against the convergence conditions and the necessary
    graph conditions. Failures are reported, never raised."""
    n, Z, W = design.n, design.Z, design.W
    c, eps = design.c, design.eps
    one = np.ones(n)
    out = []

    def add(name, residual, note="", ok=None, skipped=False):
        residual = float(residual)
        passed = residual <= tol if ok is None else bool(ok)
        out.append(Check(name, passed, residual, tol, skipped, note))

    add("w_null", np.max(np.abs(W @ one)))
    lamW = np.linalg.eigvalsh((W + W.T) / 2)
    add("fiedler_floor", max(0.0, c - (lamW[0] + lamW[1])), f"c={c:.6g}")
    add("z_minus_w_psd", max(0.0, -_lam_min(Z - W)))
    add("w_psd", max(0.0, -lamW[0]))
    add("z_total_sum", abs(one @ Z @ one))
    dZ = np.diag(Z)
    add("z_const_diag", np.max(np.abs(dZ - dZ[0])))
    add("z_diag_bounds", max(0.0, (2 - eps) - dZ[0], dZ[0] - (2 + eps)), f"eps={eps:g}")
    add("z_row_sums", np.max(np.abs(Z @ one)))
    add("symmetric", max(np.max(np.abs(Z - Z.T)), np.max(np.abs(W - W.T))))
    Ldiag = (2.0 - dZ[0]) / 2.0
    add("l_diag", 0.0 if abs(Ldiag) < 1.0 else abs(Ldiag), ok=abs(Ldiag) < 1.0)
    if design.M is not None:
        add("m_gram", np.max(np.abs(design.M.T @ design.M - W)))

    # necessary graph conditions
    bound = max(abs(dZ[0]), 0.0)
    ent = max(np.max(np.abs(Z)), np.max(np.abs(W)))
    add("entry_bound", max(0.0, ent - bound))
    eW, eZ = edges_of(W, zero_threshold), edges_of(Z, zero_threshold)
    degW, degZ = degrees(n, eW), degrees(n, eZ)
    add("w_connected", 0.0 if is_connected(n, eW) else 1.0, ok=is_connected(n, eW))
    add("w_min_degree", max(0, 1 - degW.min()), ok=degW.min() >= 1)
    add("w_min_edges", max(0, n - 1 - len(eW)), f"edges={len(eW)}", ok=len(eW) >= n - 1)
    add("z_connected", 0.0 if is_connected(n, eZ) else 1.0, ok=is_connected(n, eZ))
    if n > 2:
        add("z_min_degree", max(0, 2 - degZ.min()), ok=degZ.min() >= 2)
        add("z_min_edges", max(0, n - len(eZ)), f"edges={len(eZ)}", ok=len(eZ) >= n)
    else:
        add("z_min_degree", 0.0, "n<=2", ok=True, skipped=True)
        add("z_min_edges", 0.0, "n<=2", ok=True, skipped=True)
    if n <= PARTITION_CHECK_MAX_N:
        v = partition_violation(n, eZ)
        note = "" if v is None else f"S={sorted(i + 1 for i in v[0])}"
        add("partition_balance", 0.0 if v is None else v[1], note, ok=v is None)
    else:
        add("partition_balance", 0.0, f"skipped for n>{PARTITION_CHECK_MAX_N}", ok=True, skipped=True)
    return ValidityReport(out)


# --------------------------------------------------------------------------
# presets
# --------------------------------------------------------------------------


def _lap_from_offdiag(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    K = A.copy()
    np.fill_diagonal(K, 0.0)
    np.fill_diagonal(K, -K.sum(axis=1))
    return K


def _dr(n):
    if n != 2:
        raise PresetArityError("dr requires n = 2")
    M = np.array([[-1.0, 1.0]])
    Z = np.array([[2.0, -2.0], [-2.0, 2.0]])
    return Z, M.T @ M, M


def _ryu(n):
    if n != 3:
        raise PresetArityError("ryu requires n = 3")
    return _ryu_ext(3)


def _ryu_ext(n):
    if n < 3:
        raise PresetArityError("ryu_ext requires n >= 3")
    s = math.sqrt(2.0 / (n - 1))
    M = np.zeros((n - 1, n))
    for i in range(n - 1):
        M[i, i], M[i, n - 1] = -s, s
    Z = (2 + 2 / (n - 1)) * np.eye(n) - (2 / (n - 1)) * np.ones((n, n))
    return Z, M.T @ M, M


def _mt(n):
    if n < 3:
        raise PresetArityError("mt requires n >= 3")
    M = np.zeros((n - 1, n))
    for j in range(n - 1):
        M[j, j], M[j, j + 1] = -1.0, 1.0
    A = np.zeros((n, n))
    for i in range(n):
        A[i, (i + 1) % n] = A[(i + 1) % n, i] = -1.0
    return _lap_from_offdiag(A), M.T @ M, M


def _full(n):
    if n < 2:
        raise PresetArityError("fully_connected requires n >= 2")
    K = (2 + 2 / (n - 1)) * np.eye(n) - (2 / (n - 1)) * np.ones((n, n))
    return K, K.copy(), None


def _two_block(n):
    if n < 2 or n % 2:
        raise PresetArityError("two_block_fiedler requires even n")
    m = n // 2
    K = 2.0 * np.eye(n)
    K[:m, m:] = K[m:, :m] = -2.0 / m
    return K, K.copy(), None


def _dblock_mt(n, d):
    if d is None or d < 2 or n % d:
        raise PresetArityError("dblock_mt requires a block count d >= 2 dividing n")
    m = n // d
    Z = 2.0 * np.eye(n)
    W = np.zeros((n, n))
    blk = lambda k: slice(k * m, (k + 1) * m)
    for k in range(d):
        nxt = (k + 1) % d
        if k == d - 1 and d == 2:
            break
        Z[blk(k), blk(nxt)] += -1.0 / m
        Z[blk(nxt), blk(k)] += -1.0 / m
    if d == 2:
        Z[blk(0), blk(1)] = Z[blk(1), blk(0)] = -2.0 / m
    for k in range(d):
        W[blk(k), blk(k)] = (1.0 if k in (0, d - 1) else 2.0) * np.eye(m)
        if k + 1 < d:
            W[blk(k), blk(k + 1)] = W[blk(k + 1), blk(k)] = -1.0 / m
    return Z, W, None


PRESETS = ("dr", "ryu", "ryu_ext", "mt", "fully_connected", "two_block_fiedler", "dblock_mt")


def preset(name: str, n: int, d: int | None = None, gamma: float = DEFAULT_GAMMA) -> Design:
    """Published designs in the common (Z, W, L, M) form."""
    builders = {"dr": _dr, "ryu": _ryu, "ryu_ext": _ryu_ext, "mt": _mt,
                "fully_connected": _full, "two_block_fiedler": _two_block}
    if name == "dblock_mt":
        Z, W, M = _dblock_mt(n, d)
    elif name in builders:
        Z, W, M = builders[name](n)
    else:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    meta = {"preset": name, "c": default_c(n), "eps": 0.0}
    if d is not None and name == "dblock_mt":
        meta["d"] = d
    return Design(n, Z, W, gamma, M, meta)


def laplacian_from_edges(n: int, weighted_edges) -> np.ndarray:
    """Graph Laplacian from ``(i, j, w)`` triples (0-based)."""
    A = np.zeros((n, n))
    for i, j, w in weighted_edges:
        A[i, j] = A[j, i] = -w
    return _lap_from_offdiag(A)


def all_pairs(n: int):
    return itertools.combinations(range(n), 2)
