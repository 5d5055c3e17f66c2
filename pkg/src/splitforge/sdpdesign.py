"""Design SDPs: choose (Z, W) under structural constraints and an objective."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .conic import ConicProblem, as_affine, psd_lambda_sum_device, solver_tolerance
from .design import (DEFAULT_GAMMA, ZERO_THRESHOLD, Design, default_c, degrees, is_connected,
                     partition_violation, validate, PARTITION_CHECK_MAX_N)
from .errors import InfeasibleDesignError, SolverFailureError

OBJECTIVES = ("max_fiedler", "min_slem", "min_resistance", "min_znorm", "feasibility", "custom_linear")


FIEDLER_MARGIN = 2e-6


def _pairs(pairs) -> frozenset:
    out = set()
    for i, j in pairs:
        i, j = int(i), int(j)
        if i == j:
            raise ValueError(f"forced zero on the diagonal ({i}, {j})")
        out.add((min(i, j), max(i, j)))
    return frozenset(out)


@dataclass(frozen=True)
class ConstraintSet:
    """Structural restrictions on (Z, W). Index pairs are 0-based."""

    n: int
    c: float | None = None
    eps: float = 0.0
    z_zero: frozenset = frozenset()
    w_zero: frozenset = frozenset()
    fixed_entries: dict = field(default_factory=dict)
    block_partition: tuple | None = None
    stieltjes_w: bool = False
    min_row_nonzeros_w: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "z_zero", _pairs(self.z_zero))
        object.__setattr__(self, "w_zero", _pairs(self.w_zero))
        if not 0.0 <= self.eps < 2.0:
            raise ValueError("eps must lie in [0, 2)")
        if self.block_partition is not None:
            bp = tuple(int(b) for b in self.block_partition)
            if min(bp) < 1 or sum(bp) != self.n:
                raise ValueError(f"block sizes {bp} do not partition {self.n}")
            object.__setattr__(self, "block_partition", bp)
        for (i, j) in self.z_zero | self.w_zero:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"pair ({i}, {j}) out of range")

    @property
    def c_value(self) -> float:
        return default_c(self.n) if self.c is None else float(self.c)

    def effective_zeros(self) -> tuple[frozenset, frozenset]:
        z, w = set(self.z_zero), set(self.w_zero)
        if self.block_partition is not None:
            bz, bw = _block_zeros(self.n, self.block_partition)
            z |= bz
            w |= bw
        return frozenset(z), frozenset(w)

    def digest(self) -> str:
        import hashlib
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {"n": self.n,
                "zZero": sorted([i + 1, j + 1] for i, j in self.z_zero),
                "wZero": sorted([i + 1, j + 1] for i, j in self.w_zero),
                "blocks": list(self.block_partition) if self.block_partition else None,
                "c": self.c, "eps": self.eps, "stieltjes": self.stieltjes_w,
                "minRowNonzerosW": self.min_row_nonzeros_w}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, obj: dict, n: int | None = None) -> "ConstraintSet":
        n = int(obj.get("n", n) if obj.get("n", n) is not None else 0)
        if n < 2:
            raise ValueError("constraint set needs n >= 2")
        sh = lambda ps: [(int(a) - 1, int(b) - 1) for a, b in ps or []]
        return cls(n, obj.get("c"), float(obj.get("eps", 0.0) or 0.0), sh(obj.get("zZero")),
                   sh(obj.get("wZero")), {}, tuple(obj["blocks"]) if obj.get("blocks") else None,
                   bool(obj.get("stieltjes", False)), obj.get("minRowNonzerosW"))


@dataclass(frozen=True)
class Objective:
    kind: str = "max_fiedler"
    beta_z: float = 1.0
    beta_w: float = 1.0
    cz: np.ndarray | None = None
    cw: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.kind!r}")
        if self.beta_z < 0 or self.beta_w < 0:
            raise ValueError("objective weights must be nonnegative")
        if self.kind not in ("feasibility", "custom_linear", "min_znorm") and self.beta_z + self.beta_w <= 0:
            raise ValueError("beta_z + beta_w must be positive")


def _block_of(block_sizes) -> list[int]:
    out = []
    for k, m in enumerate(block_sizes):
        out += [k] * m
    return out


def _block_zeros(n, block_sizes):
    b = _block_of(block_sizes)
    z = {(i, j) for i in range(n) for j in range(i + 1, n) if b[i] == b[j]}
    w = {(i, j) for i in range(n) for j in range(i + 1, n) if abs(b[i] - b[j]) >= 2}
    return z, w


def dblock_constraints(n: int, block_sizes, **kw) -> ConstraintSet:
    """No Z edges inside a block; W edges only between neighbouring blocks."""
    block_sizes = tuple(int(b) for b in block_sizes)
    if min(block_sizes) < 1 or sum(block_sizes) != n:
        raise ValueError(f"block sizes {block_sizes} do not partition {n}")
    z, w = _block_zeros(n, block_sizes)
    return ConstraintSet(n, z_zero=z, w_zero=w, block_partition=block_sizes, **kw)


# --------------------------------------------------------------------------
# necessary-condition diagnosis
# --------------------------------------------------------------------------


def diagnose(cs: ConstraintSet) -> list[tuple[str, str]]:
    """Necessary conditions that no design satisfying ``cs`` can meet.

    Returns ``(condition, explanation)`` pairs; empty when nothing is found.
    """
    n = cs.n
    zz, wz = cs.effective_zeros()
    allowed_z = [(i, j) for i in range(n) for j in range(i + 1, n) if (i, j) not in zz]
    allowed_w = [(i, j) for i in range(n) for j in range(i + 1, n) if (i, j) not in wz]
    out = []
    for (mat, i, j), v in cs.fixed_entries.items():
        a, b = min(i, j), max(i, j)
        if i != j and v != 0 and (a, b) in (zz if mat == "Z" else wz):
            out.append(("contradiction", f"{mat}[{i + 1},{j + 1}] fixed to {v} but forced to zero"))
    if not is_connected(n, allowed_w):
        out.append(("w_connected", "allowed W edges do not connect all nodes"))
    if degrees(n, allowed_w).min() < 1:
        out.append(("w_min_degree", "some node has no allowed W edge"))
    if not is_connected(n, allowed_z):
        out.append(("z_connected", "allowed Z edges do not connect all nodes"))
    if n > 2 and degrees(n, allowed_z).min() < 2:
        k = int(np.argmin(degrees(n, allowed_z)))
        out.append(("z_min_degree", f"node {k + 1} has fewer than two allowed Z edges"))
    if n > 2 and len(allowed_z) < n:
        out.append(("z_min_edges", f"only {len(allowed_z)} Z edges allowed, need {n}"))
    if n <= PARTITION_CHECK_MAX_N:
        v = partition_violation(n, allowed_z)
        if v is not None:
            S = sorted(i + 1 for i in v[0])
            out.append(("partition_balance",
                        f"partition S={S} is too unbalanced for the Z edges allowed inside its sides"))
    elif cs.block_partition is not None:
        # cheap subset: partitions made of whole blocks
        b = _block_of(cs.block_partition)
        d = len(cs.block_partition)
        for mask in range(1, 2 ** (d - 1)):
            side = [(mask >> b[i]) & 1 for i in range(n)]
            internal = sum(1 for i, j in allowed_z if side[i] == side[j])
            if abs(2 * sum(side) - n) > 2 * internal:
                out.append(("partition_balance", f"block union mask {mask} is too unbalanced"))
                break
    return out


# --------------------------------------------------------------------------
# SDP assembly
# --------------------------------------------------------------------------


def _add_core(prob: ConicProblem, cs: ConstraintSet, c: float | None = None, margin: float = 0.0):
    n = cs.n
    one = np.ones(n)
    Z = prob.symmetric(n, "Z")
    W = prob.symmetric(n, "W")
    Ze, We = Z.expr(), W.expr()
    prob.add_eq(We @ one, 0.0, name="w_null")
    prob.add_eq(Ze @ one, 0.0, name="z_null")
    prob.add_psd(Ze - We, name="z_minus_w")
    prob.add_psd(We, name="w_psd")
    for i in range(1, n):
        prob.add_eq(Ze[i, i] - Ze[0, 0], 0.0, name=f"zdiag{i}")
    if cs.eps == 0:
        prob.add_eq(Ze[0, 0], 2.0, name="z11")
    else:
        prob.add_ge(Ze[0, 0], 2.0 - cs.eps, name="z11_lo")
        prob.add_le(Ze[0, 0], 2.0 + cs.eps, name="z11_hi")
    zz, wz = cs.effective_zeros()
    for i, j in sorted(zz):
        prob.add_eq(Ze[i, j], 0.0, name=f"zz{i}_{j}")
    for i, j in sorted(wz):
        prob.add_eq(We[i, j], 0.0, name=f"wz{i}_{j}")
    if cs.stieltjes_w:
        for i in range(n):
            for j in range(i + 1, n):
                if (i, j) not in wz:
                    prob.add_le(We[i, j], 0.0, name=f"stj{i}_{j}")
    for (mat, i, j), v in cs.fixed_entries.items():
        E = Ze if mat == "Z" else We
        prob.add_eq(E[i, j], float(v), name=f"fix{mat}{i}_{j}")
    level = cs.c_value if c is None else c
    # a small margin keeps floor-tight solutions valid after rounding
    psd_lambda_sum_device(prob, We, n, level + margin, tag="_c")
    return Z, W


def _scalar_device(prob, kind, K, n, eps, tag):
    """Return an affine scalar measuring ``K`` for one matrix."""
    if kind == "max_fiedler":
        g = prob.scalar(f"gamma{tag}")
        psd_lambda_sum_device(prob, K, n, g.expr(), tag=tag)
        return g.expr()
    if kind == "min_slem":
        g = prob.scalar(f"gamma{tag}")
        P = np.eye(n) - K / (2.0 + eps) - np.ones((n, n)) / n
        I = np.eye(n)
        prob.add_psd(g * I - P, name=f"slem_hi{tag}")
        prob.add_psd(P + g * I, name=f"slem_lo{tag}")
        return g.expr()
    if kind == "min_resistance":
        Y = prob.symmetric(n, f"Yr{tag}")
        from .conic import bmat
        prob.add_psd(bmat([[K + np.ones((n, n)) / n, np.eye(n)], [np.eye(n), Y]]), name=f"schur{tag}")
        return Y.expr().trace()
    raise ValueError(kind)


def build_design_sdp(objective: Objective, cs: ConstraintSet, c: float | None = None,
                     margin: float = 0.0) -> ConicProblem:
    """Assemble the design SDP. Variables are exposed as ``prob.handles``."""
    bad = [d for d in diagnose(cs) if d[0] == "contradiction"]
    if bad:
        raise InfeasibleDesignError(bad[0][1], "contradiction")
    prob = ConicProblem(f"design_{objective.kind}")
    Z, W = _add_core(prob, cs, c, margin)
    n = cs.n
    handles = {"Z": Z, "W": W}
    kind = objective.kind
    if kind in ("max_fiedler", "min_slem", "min_resistance"):
        obj = as_affine(0.0)
        for name, K, beta in (("z", Z.expr(), objective.beta_z), ("w", W.expr(), objective.beta_w)):
            if beta > 0:
                term = _scalar_device(prob, kind, K, n, cs.eps, "_" + name)
                handles["measure_" + name] = term
                obj = obj + beta * term
        if kind == "max_fiedler":
            prob.maximize(obj)
        else:
            prob.minimize(obj)
    elif kind == "min_znorm":
        g = prob.scalar("gamma_zw")
        prob.add_psd(g * np.eye(n) - (Z.expr() - W.expr()), name="znorm")
        handles["measure"] = g.expr()
        prob.minimize(g)
    elif kind == "custom_linear":
        obj = as_affine(0.0)
        if objective.cz is not None:
            obj = obj + Z.expr().vdot(objective.cz)
        if objective.cw is not None:
            obj = obj + W.expr().vdot(objective.cw)
        prob.minimize(obj)
    else:
        prob.minimize(0.0)
    prob.handles = handles
    return prob


def clean_design_matrices(Z, W, cs: ConstraintSet):
    """Symmetrize, zero forced entries, restore exact null spaces."""
    Z = (Z + Z.T) / 2
    W = (W + W.T) / 2
    zz, wz = cs.effective_zeros()
    for i, j in zz:
        Z[i, j] = Z[j, i] = 0.0
    for i, j in wz:
        W[i, j] = W[j, i] = 0.0
    # solver noise below the structural threshold becomes an exact zero
    off = ~np.eye(Z.shape[0], dtype=bool)
    Z[off & (np.abs(Z) < ZERO_THRESHOLD)] = 0.0
    W[off & (np.abs(W) < ZERO_THRESHOLD)] = 0.0
    np.fill_diagonal(W, 0.0)
    np.fill_diagonal(W, -W.sum(axis=1))
    n = Z.shape[0]
    delta = float(np.mean(np.diag(Z)))
    if cs.eps == 0:
        delta = 2.0
    else:
        delta = min(max(delta, 2.0 - cs.eps), 2.0 + cs.eps)
    np.fill_diagonal(Z, delta)
    # minimal-norm shift of the free off-diagonal entries so rows sum to zero
    fixed = {(min(i, j), max(i, j)) for (mat, i, j) in cs.fixed_entries if mat == "Z"}
    free = [(i, j) for i in range(n) for j in range(i + 1, n)
            if (i, j) not in zz and (i, j) not in fixed and abs(Z[i, j]) > 1e-9]
    if free:
        D = np.zeros((n, len(free)))
        for k, (i, j) in enumerate(free):
            D[i, k] = D[j, k] = 1.0
        shift = np.linalg.lstsq(D, -Z.sum(axis=1), rcond=None)[0]
        for k, (i, j) in enumerate(free):
            Z[i, j] += shift[k]
            Z[j, i] = Z[i, j]
    return Z, W


def solve_design(objective: Objective | str = "max_fiedler", cs: ConstraintSet | None = None,
                 gamma: float = DEFAULT_GAMMA, n: int | None = None, tol: float | None = None,
                 c: float | None = None) -> Design:
    """Solve a design SDP and return a validated design."""
    if isinstance(objective, str):
        objective = Objective(objective)
    if cs is None:
        if n is None:
            raise ValueError("give a constraint set or n")
        cs = ConstraintSet(n)
    issues = diagnose(cs)
    if issues:
        cond, why = issues[0]
        raise InfeasibleDesignError(f"infeasible: {cond} violated ({why})", cond,
                                    {"all": issues})
    # designs whose Fiedler floor is tight (e.g. an unweighted path W) only
    # exist without the margin, so fall back to the exact floor
    base = solver_tolerance(tol)
    attempts = ((FIEDLER_MARGIN, base, 1e-6), (0.0, base, 1e-6), (0.0, min(base, 1e-11), 1e-5))
    for margin, t, vtol in attempts:
        prob = build_design_sdp(objective, cs, c, margin)
        sol = prob.solve(tol=t)
        if sol.status == "optimal":
            Z, W = clean_design_matrices(sol[prob.handles["Z"]], sol[prob.handles["W"]], cs)
            rep = validate(Design(cs.n, Z, W, gamma, None,
                                       {"c": cs.c_value if c is None else c, "eps": cs.eps}),
                         tol=vtol)
            if rep.passed:
                break
    if sol.status == "infeasible":
        raise InfeasibleDesignError("infeasible: the design SDP has no solution", None)
    if sol.status != "optimal":
        raise SolverFailureError(f"design SDP returned {sol.status} ({sol.solver_status})")
    if not rep.passed:
        raise SolverFailureError("solution failed validation:\n" + rep.summary())
    meta = {"objective": objective.kind, "beta_z": objective.beta_z, "beta_w": objective.beta_w,
            "c": cs.c_value if c is None else c, "eps": cs.eps,
            "constraints": cs.digest(), "objective_value": sol.objective,
            "validated_tol": vtol}
    design = Design(cs.n, Z, W, gamma, None, meta)
    return design
