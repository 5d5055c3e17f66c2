"""Mixed-integer design: minimum-edge and minimum-iteration-time formulations.

Everything is solved by the built-in :func:`branch_and_bound`; node
relaxations are SDPs (through :mod:`splitforge.conic`) or LPs (through
``scipy.optimize.linprog``).
"""
from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .conic import Affine, ConicProblem
from .design import (DEFAULT_GAMMA, Design, default_c, is_connected, preset, validate)
from .errors import InfeasibleDesignError, SolverFailureError
from .sched import Schedule, TimingModel, compute_schedule, lower_bound_q
from .sdpdesign import (ConstraintSet, Objective, _add_core, clean_design_matrices,
                        dblock_constraints, diagnose, solve_design)

log = logging.getLogger(__name__)

NODE_BUDGET = 50_000
INT_TOL = 1e-6


# --------------------------------------------------------------------------
# generic branch and bound
# --------------------------------------------------------------------------


@dataclass
class Relaxation:
    """Outcome of one node relaxation. ``values`` holds the binaries."""

    status: str  # 'optimal' | 'infeasible' | 'failed'
    bound: float = math.inf
    values: np.ndarray | None = None
    payload: Any = None


@dataclass
class BnBResult:
    status: str  # 'optimal' | 'suboptimal' | 'infeasible'
    value: float | None
    payload: Any
    nodes: int
    bound: float
    log: list = field(default_factory=list)


def branch_and_bound(relax: Callable[[dict], Relaxation], n_binaries: int,
                     heuristic: Callable[[dict, Relaxation], list] | None = None,
                     incumbents=(), node_budget: int = NODE_BUDGET,
                     integral_objective: bool = False, gap_tol: float = 1e-6,
                     int_tol: float = INT_TOL, time_limit: float | None = None,
                     log_every: int = 50) -> BnBResult:
    """Minimize over binaries by best-first search.

    ``relax(fix)`` solves the relaxation with the binaries in ``fix`` (index
    to 0/1) pinned. Branching picks the most fractional binary (lowest index
    on ties); among nodes with equal bounds the deepest is explored first.
    ``heuristic(fix, relaxation)`` may return extra ``(value, payload)``
    candidates. Completion proves optimality; running out of nodes or time
    returns the incumbent flagged ``'suboptimal'``.
    """
    lines: list[str] = []
    start = time.monotonic()
    best_val, best_payload = math.inf, None
    for v, p in incumbents:
        if v < best_val:
            best_val, best_payload = v, p
    if best_payload is not None:
        lines.append(f"seed incumbent {best_val:.6g}")

    def prunable(bound):
        if integral_objective:
            bound = math.ceil(bound - 1e-6)
        return bound >= best_val - gap_tol

    def offer(cands):
        nonlocal best_val, best_payload
        for v, p in cands or ():
            if v < best_val - 1e-12:
                best_val, best_payload = v, p
                lines.append(f"node {nodes} new incumbent {v:.6g}")

    nodes = 0
    failed = False
    counter = itertools.count()
    heap: list = []

    def evaluate(fix, depth):
        nonlocal nodes, failed
        nodes += 1
        rel = relax(fix)
        if rel.status == "failed":
            failed = True
            return
        if rel.status != "optimal":
            return
        if heuristic is not None:
            offer(heuristic(fix, rel))
        free = [k for k in range(n_binaries) if k not in fix]
        frac = [abs(rel.values[k] - round(rel.values[k])) for k in free]
        if not free or max(frac, default=0.0) <= int_tol:
            offer([(rel.bound, rel.payload)])
            return
        if prunable(rel.bound):
            return
        k = free[int(np.argmax(frac))]
        heapq.heappush(heap, (round(rel.bound, 9), -depth, next(counter), fix, k, rel.values[k]))

    evaluate({}, 0)
    if nodes == 1 and not heap and best_payload is None:
        lines.append("root relaxation infeasible")
        return BnBResult("infeasible", None, None, nodes, math.inf, lines)
    exhausted = False
    while heap:
        bound, negdepth, _, fix, k, val = heap[0]
        if prunable(bound):
            heap.clear()
            break
        if nodes >= node_budget or (time_limit is not None and time.monotonic() - start > time_limit):
            exhausted = True
            break
        heapq.heappop(heap)
        # explore the side the relaxation leans to first
        for b in ((1, 0) if val >= 0.5 else (0, 1)):
            evaluate({**fix, k: b}, -negdepth + 1)
        if nodes % log_every < 2:
            lb = heap[0][0] if heap else best_val
            lines.append(f"node {nodes} bound {lb:.6g} incumbent {best_val:.6g} "
                         f"gap {best_val - lb:.3g} open {len(heap)}")
    lower = min((h[0] for h in heap), default=best_val)
    if best_payload is None:
        status = "suboptimal" if exhausted else "infeasible"
        lines.append(f"finished: {status} after {nodes} nodes")
        return BnBResult(status, None, None, nodes, lower, lines)
    status = "suboptimal" if (exhausted or failed) else "optimal"
    lines.append(f"finished: {status} value {best_val:.6g} bound {min(lower, best_val):.6g} "
                 f"after {nodes} nodes")
    return BnBResult(status, best_val, best_payload, nodes, min(lower, best_val), lines)


# --------------------------------------------------------------------------
# shared pieces
# --------------------------------------------------------------------------


def _pairs(n):
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def _incidence(n, pairs) -> sp.csr_matrix:
    r, c = [], []
    for k, (i, j) in enumerate(pairs):
        r += [i, j]
        c += [k, k]
    return sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(n, len(pairs)))


def _offdiag_selector(n, pairs) -> sp.csr_matrix:
    return sp.csr_matrix((np.ones(len(pairs)), (range(len(pairs)), [i * n + j for i, j in pairs])),
                         shape=(len(pairs), n * n))


def _forced_zero_bits(cs: ConstraintSet, pairs):
    zz, wz = cs.effective_zeros()
    m = len(pairs)
    fixed = {}
    for k, p in enumerate(pairs):
        if p in zz:
            fixed[k] = 0
        if p in wz:
            fixed[m + k] = 0
    return fixed


def _bounds(nb, fix):
    lo, hi = np.zeros(nb), np.ones(nb)
    for k, b in fix.items():
        lo[k] = hi[k] = b
    return lo, hi


def pattern_matrices(n, pairs, bits):
    """(L pattern, W pattern) boolean matrices from x/y bits."""
    m = len(pairs)
    Lp = np.zeros((n, n), bool)
    Wp = np.zeros((n, n), bool)
    for k, (i, j) in enumerate(pairs):
        if bits[k] > 0.5:
            Lp[j, i] = True
        if bits[m + k] > 0.5:
            Wp[i, j] = Wp[j, i] = True
    return Lp, Wp


def _pattern_cs(cs: ConstraintSet, pairs, bits) -> ConstraintSet:
    m = len(pairs)
    zz = set(cs.z_zero) | {p for k, p in enumerate(pairs) if bits[k] < 0.5}
    wz = set(cs.w_zero) | {p for k, p in enumerate(pairs) if bits[m + k] < 0.5}
    return replace(cs, z_zero=frozenset(zz), w_zero=frozenset(wz))


def _design_on_pattern(cs, pairs, bits, objective="min_resistance", gamma=DEFAULT_GAMMA, c=None):
    """Solve the design SDP restricted to a pattern; None if infeasible."""
    pcs = _pattern_cs(cs, pairs, bits)
    try:
        return solve_design(objective, pcs, gamma=gamma, c=c)
    except (InfeasibleDesignError, SolverFailureError):
        if objective == "feasibility":
            return None
        try:
            return solve_design("feasibility", pcs, gamma=gamma, c=c)
        except (InfeasibleDesignError, SolverFailureError):
            return None


def _bits_of_design(design: Design, pairs, thr=1e-6):
    m = len(pairs)
    bits = np.zeros(2 * m)
    for k, (i, j) in enumerate(pairs):
        bits[k] = abs(design.Z[i, j]) > thr
        bits[m + k] = abs(design.W[i, j]) > thr
    return bits


def edge_counts(design: Design, thr=1e-6) -> tuple[int, int]:
    iu = np.triu_indices(design.n, 1)
    return int(np.sum(np.abs(design.Z[iu]) > thr)), int(np.sum(np.abs(design.W[iu]) > thr))


@dataclass
class DiscreteDesignProblem:
    kind: str  # 'min_edges' | 'min_time_misdp' | 'min_time_milp'
    n: int
    timing: TimingModel | None = None
    r: int | None = None
    big_M: float | None = None
    q: float | None = None
    cs: ConstraintSet | None = None
    min_row_nonzeros: int | None = None

    def __post_init__(self):
        if self.cs is None:
            self.cs = ConstraintSet(self.n)
        if self.kind != "min_edges":
            if self.timing is None:
                raise ValueError("time objectives need a timing model")
            if self.timing.n != self.n:
                raise ValueError("timing model size does not match n")
            if self.r is None:
                self.r = self.n
            if self.r < 1:
                raise ValueError("r must be at least 1")
            t, l = self.timing.t, self.timing.l
            if self.big_M is None:
                self.big_M = self.r * (float(t.sum()) + float(np.sum(np.triu(l, 1))))
            if self.q is None:
                self.q = lower_bound_q(self.timing, self.timing.constant_latency())


@dataclass
class DiscreteResult:
    design: Design
    status: str
    objective: float
    nodes: int
    log: list
    schedule: Schedule | None = None
    z_edges: int = 0
    w_edges: int = 0
    end_time: float | None = None
    modeled_end: float | None = None


# --------------------------------------------------------------------------
# minimum edges
# --------------------------------------------------------------------------


def _edge_linking(prob, Z, W, u, n, pairs, eps, cuts=True):
    """Tie |Z_ij|, |W_ij| to the leading 2m entries of ``u`` and add the cuts."""
    m = len(pairs)
    nv = u.size
    S = _offdiag_selector(n, pairs)
    zo = Z.expr()._linmap(S, (m, 1))
    wo = W.expr()._linmap(S, (m, 1))
    ue = u.expr()
    X = ue._linmap(sp.eye(m, nv, format="csr"), (m, 1))
    Y = ue._linmap(sp.eye(m, nv, k=m, format="csr"), (m, 1))
    k = 2.0 + eps
    prob.add_le(zo - X * k, 0.0, name="zx_hi")
    prob.add_le(-zo - X * k, 0.0, name="zx_lo")
    prob.add_le(wo - Y * k, 0.0, name="wy_hi")
    prob.add_le(-wo - Y * k, 0.0, name="wy_lo")
    if cuts:
        D = _incidence(n, pairs)
        prob.add_ge(X.sum(), float(n), name="cut_zn")
        prob.add_ge(Y.sum(), float(n - 1), name="cut_wn")
        prob.add_ge(X._linmap(D, (n, 1)), 2.0, name="cut_zdeg")
        prob.add_ge(Y._linmap(D, (n, 1)), 1.0, name="cut_wdeg")
    return X, Y


def _bit_bounds(prob, u, fix, nb):
    lo, hi = _bounds(nb, fix)
    prob.add_ge(u.expr(), lo[:, None], name="bits_lo")
    prob.add_le(u.expr(), hi[:, None], name="bits_hi")


def _sdp_relaxation(prob, u, Z, W, cs, tol=None) -> Relaxation:
    sol = prob.solve(tol=tol)
    if sol.status == "infeasible":
        return Relaxation("infeasible")
    if sol.status != "optimal":
        return Relaxation("failed")
    bits = np.clip(sol[u], 0.0, 1.0)
    return Relaxation("optimal", float(sol.objective), bits,
                      {"Z": sol[Z], "W": sol[W], "bits": bits})


def min_edges_design(n: int, cs: ConstraintSet | None = None, gamma: float = DEFAULT_GAMMA,
                     node_budget: int = NODE_BUDGET, seed_incumbents: bool = True,
                     time_limit: float | None = None) -> DiscreteResult:
    """Fewest nonzero edges in G(Z) plus G(W) over valid designs."""
    if cs is None:
        cs = ConstraintSet(n)
    if n == 2:
        d = preset("dr", 2, gamma=gamma)
        return DiscreteResult(d, "optimal", 2.0, 0, ["n=2: Douglas-Rachford returned"],
                              z_edges=1, w_edges=1)
    issues = diagnose(cs)
    if issues:
        cond, why = issues[0]
        raise InfeasibleDesignError(f"infeasible: {cond} violated ({why})", cond, {"all": issues})
    pairs = _pairs(n)
    m = len(pairs)
    forced = _forced_zero_bits(cs, pairs)

    def relax(fix):
        prob = ConicProblem("min_edges")
        Z, W = _add_core(prob, cs)
        u = prob.vector(2 * m, "xy")
        _bit_bounds(prob, u, {**forced, **fix}, 2 * m)
        X, Y = _edge_linking(prob, Z, W, u, n, pairs, cs.eps)
        prob.minimize(X.sum() + Y.sum())
        return _sdp_relaxation(prob, u, Z, W, cs)

    def heuristic(fix, rel):
        # the support of the relaxed matrices is always a feasible pattern
        P = rel.payload
        bits = np.concatenate([np.abs(_offdiag(P["Z"], pairs)) > 1e-4,
                               np.abs(_offdiag(P["W"], pairs)) > 1e-4]).astype(float)
        return [(float(bits.sum()), {"bits": bits})]

    seeds = []
    if seed_incumbents:
        d = _design_on_pattern(cs, pairs, _bits_of_design(preset("mt", n), pairs), "feasibility")
        if d is not None:
            b = _bits_of_design(d, pairs)
            seeds.append((float(b.sum()), {"bits": b}))
    res = branch_and_bound(relax, 2 * m, heuristic, seeds, node_budget=node_budget,
                           integral_objective=True, time_limit=time_limit)
    if res.payload is None:
        raise InfeasibleDesignError("infeasible: no valid sparsity pattern", "min_edges",
                                    {"log": res.log})
    bits = np.round(res.payload["bits"])
    design = _design_on_pattern(cs, pairs, bits, "min_resistance", gamma)
    if design is None:
        raise SolverFailureError("re-solve on the optimal pattern failed")
    ze, we = edge_counts(design)
    design.meta.update({"objective": "min_edges", "edges": ze + we, "bnb_status": res.status})
    return DiscreteResult(design, res.status, float(ze + we), res.nodes, res.log,
                          z_edges=ze, w_edges=we)


def _offdiag(K, pairs):
    return np.array([K[i, j] for i, j in pairs])


# --------------------------------------------------------------------------
# minimum iteration time
# --------------------------------------------------------------------------


def schedule_rows(n, timing: TimingModel, r, a, q, x0, y0, s0, b0, ncols):
    """Big-M schedule rows ``A u >= lo`` over a stacked variable vector.

    ``x0``/``y0`` index the Z/W pair bits, ``s0`` the r*n start times
    (iteration-major), ``b0`` the slack above ``r q``.
    """
    pairs = _pairs(n)
    t, l = timing.t, timing.l
    rows, cols, vals, lo = [], [], [], []
    rid = itertools.count()

    def add(entries, rhs):
        k = next(rid)
        for c, v in entries:
            rows.append(k)
            cols.append(c)
            vals.append(v)
        lo.append(rhs)

    S = lambda k, i: s0 + k * n + i
    for p, (i, j) in enumerate(pairs):
        for k in range(r):
            # within an iteration j waits for i when x_ij = 1
            add([(S(k, j), 1.0), (S(k, i), -1.0), (x0 + p, -(t[i] + l[i, j] + a))], -a)
        for k in range(r - 1):
            add([(S(k + 1, i), 1.0), (S(k, j), -1.0), (y0 + p, -(t[j] + l[j, i] + a))], -a)
            add([(S(k + 1, j), 1.0), (S(k, i), -1.0), (y0 + p, -(t[i] + l[i, j] + a))], -a)
    for k in range(r - 1):
        for i in range(n):
            add([(S(k + 1, i), 1.0), (S(k, i), -1.0)], t[i])
    pidx = {p: idx for idx, p in enumerate(pairs)}
    for i in range(n):
        add([(b0, 1.0), (S(r - 1, i), -1.0)], t[i] - r * q)
        for j in range(n):
            if j != i:
                p = pidx[(min(i, j), max(i, j))]
                add([(b0, 1.0), (S(r - 1, i), -1.0), (y0 + p, -l[i, j])], t[i] - r * q)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(len(lo), ncols))
    return A, np.array(lo)


def _end_time(n, pairs, bits, timing, r):
    Lp, Wp = pattern_matrices(n, pairs, bits)
    sch = compute_schedule(Lp.astype(float), timing, r, W=Wp.astype(float))
    return sch, float(sch.e[-1])


def _block_seeds(n):
    sizes = []
    for d in range(2, n + 1):
        base, extra = divmod(n, d)
        if base == 0:
            continue
        sizes.append(tuple([base + 1] * extra + [base] * (d - extra)))
    return sizes


def _seed_designs(n, cs, gamma):
    out = []
    for sz in _block_seeds(n):
        try:
            bcs = dblock_constraints(n, sz)
            merged = replace(bcs, z_zero=bcs.z_zero | cs.z_zero, w_zero=bcs.w_zero | cs.w_zero,
                             eps=cs.eps, c=cs.c, stieltjes_w=cs.stieltjes_w,
                             fixed_entries=cs.fixed_entries)
            out.append(solve_design("min_resistance", merged, gamma=gamma))
        except (InfeasibleDesignError, SolverFailureError, ValueError):
            continue
    for name in ("mt", "fully_connected"):
        try:
            out.append(preset(name, n, gamma=gamma))
        except Exception:  # noqa: BLE001 - a seed is optional
            continue
    return out


def min_time_design_misdp(n: int, timing: TimingModel, r: int | None = None,
                          cs: ConstraintSet | None = None, gamma: float = DEFAULT_GAMMA,
                          node_budget: int = NODE_BUDGET, time_limit: float | None = None,
                          objective: str = "min_resistance", milp_seed: bool = True) -> DiscreteResult:
    """Minimize the modeled end time of ``r`` iterations over valid designs."""
    prob_def = DiscreteDesignProblem("min_time_misdp", n, timing, r, cs=cs)
    cs, r, a, q = prob_def.cs, prob_def.r, prob_def.big_M, prob_def.q
    issues = diagnose(cs)
    if issues:
        cond, why = issues[0]
        raise InfeasibleDesignError(f"infeasible: {cond} violated ({why})", cond, {"all": issues})
    pairs = _pairs(n)
    m = len(pairs)
    nv = 2 * m + r * n + 1
    A, lo_rows = schedule_rows(n, timing, r, a, q, 0, m, 2 * m, nv - 1, nv)
    forced = _forced_zero_bits(cs, pairs)

    def relax(fix):
        prob = ConicProblem("min_time")
        Z, W = _add_core(prob, cs)
        u = prob.vector(nv, "xysb")
        ue = u.expr()
        bits = Affine((2 * m, 1), {u: sp.eye(2 * m, nv, format="csr")}, np.zeros(2 * m))
        lo, hi = _bounds(2 * m, {**forced, **fix})
        prob.add_ge(bits, lo[:, None], name="bits_lo")
        prob.add_le(bits, hi[:, None], name="bits_hi")
        prob.add_ge(ue._linmap(sp.eye(r * n + 1, nv, k=2 * m, format="csr"), (r * n + 1, 1)), 0.0,
                    name="s_b_nonneg")
        _edge_linking(prob, Z, W, u, n, pairs, cs.eps)
        prob.add_ge(Affine((A.shape[0], 1), {u: A}, np.zeros(A.shape[0])), lo_rows[:, None],
                    name="sched")
        prob.minimize(Affine((1, 1), {u: sp.csr_matrix(([1.0], ([0], [nv - 1])), shape=(1, nv))},
                             np.zeros(1)))
        sol = prob.solve()
        if sol.status == "infeasible":
            return Relaxation("infeasible")
        if sol.status != "optimal":
            return Relaxation("failed")
        uv = sol[u]
        bitsv = np.clip(uv[:2 * m], 0, 1)
        return Relaxation("optimal", float(uv[-1]), bitsv,
                          {"bits": bitsv, "Z": sol[Z], "W": sol[W], "s": uv[2 * m:-1].reshape(r, n)})

    def value_of(bits):
        _, end = _end_time(n, pairs, bits, timing, r)
        return max(0.0, end - r * q), end

    tried: dict = {}

    def heuristic(fix, rel):
        out = []
        cands = [(rel.values > 0.5).astype(float)]
        P = rel.payload
        cands.append(np.concatenate([np.abs(_offdiag(P["Z"], pairs)) > 1e-4,
                                     np.abs(_offdiag(P["W"], pairs)) > 1e-4]).astype(float))
        for bits in cands:
            key = bits.tobytes()
            if key in tried:
                continue
            d = _design_on_pattern(cs, pairs, bits, "feasibility", gamma)
            tried[key] = d is not None
            if d is None:
                continue
            bits = _bits_of_design(d, pairs)
            v, _ = value_of(bits)
            out.append((v, {"bits": bits}))
        return out

    seeds = []
    for d in _seed_designs(n, cs, gamma):
        bits = _bits_of_design(d, pairs)
        if any(bits[k] != b for k, b in forced.items()):
            continue
        seeds.append((value_of(bits)[0], {"bits": bits}))
    if milp_seed:
        # sign-restricted designs are valid here too, so the fast MILP gives a strong incumbent
        try:
            lin = min_time_design_milp(n, timing, r, cs=cs, gamma=gamma, node_budget=2000,
                                       time_limit=30.0)
            bits = _bits_of_design(lin.design, pairs)
            seeds.append((value_of(bits)[0], {"bits": bits}))
        except (InfeasibleDesignError, SolverFailureError):
            pass
    res = branch_and_bound(relax, 2 * m, heuristic, seeds, node_budget=node_budget,
                           time_limit=time_limit)
    return _finish_time_design(res, n, cs, pairs, timing, r, q, gamma, objective, "min_time_misdp")


def _finish_time_design(res, n, cs, pairs, timing, r, q, gamma, objective, kind,
                        stage_two_c=None):
    if res.payload is None:
        raise InfeasibleDesignError("infeasible: no design pattern found", kind, {"log": res.log})
    bits = np.round(res.payload["bits"])
    design = res.payload.get("design")
    if design is None:
        design = _design_on_pattern(cs, pairs, bits, objective, gamma, c=stage_two_c)
    if design is None:
        raise SolverFailureError("re-solve on the chosen pattern failed")
    schedule = compute_schedule(design, timing, r)
    end = float(schedule.e[-1])
    ze, we = edge_counts(design)
    b = max(0.0, end - r * q)
    design.meta.update({"objective": kind, "r": r, "q": q, "end_time": end,
                        "bnb_status": res.status})
    return DiscreteResult(design, res.status, b, res.nodes, res.log, schedule, ze, we, end, b + r * q)


# --------------------------------------------------------------------------
# MILP restriction with sign-restricted Z and W
# --------------------------------------------------------------------------


class _MilpModel:
    """Columns: x(m) y(m) zneg(m) delta f(2m) s(r n) b."""

    def __init__(self, n, timing, r, a, q, eps, min_row_nonzeros, forced):
        self.n, self.r = n, r
        self.pairs = pairs = _pairs(n)
        m = self.m = len(pairs)
        self.x0, self.y0, self.z0, self.d0 = 0, m, 2 * m, 3 * m
        self.f0 = 3 * m + 1
        self.s0 = self.f0 + 2 * m
        self.b0 = self.s0 + r * n
        nv = self.nv = self.b0 + 1
        A1, lo1 = schedule_rows(n, timing, r, a, q, self.x0, self.y0, self.s0, self.b0, nv)
        ub_rows = [-A1]
        ub_rhs = [-lo1]
        I = sp.eye(m, format="csr")

        def cols(block0, M):
            M = sp.csr_matrix(M)
            return sp.hstack([sp.csr_matrix((M.shape[0], block0)), M,
                              sp.csr_matrix((M.shape[0], nv - block0 - M.shape[1]))]).tocsr()

        # y <= x, zneg <= (2+eps) x, zneg >= x/(n-1)
        ub_rows += [cols(self.y0, I) - cols(self.x0, I),
                    cols(self.z0, I) - (2 + eps) * cols(self.x0, I),
                    cols(self.x0, I) / (n - 1) - cols(self.z0, I)]
        ub_rhs += [np.zeros(m)] * 3
        # flow on ordered pairs: f[2p] is i->j, f[2p+1] is j->i
        F = sp.lil_matrix((n, 2 * m))
        Fy = sp.lil_matrix((2 * m, nv))
        for p, (i, j) in enumerate(pairs):
            F[i, 2 * p] += 1
            F[j, 2 * p] -= 1
            F[j, 2 * p + 1] += 1
            F[i, 2 * p + 1] -= 1
            for k in (2 * p, 2 * p + 1):
                Fy[k, self.f0 + k] = 1
                Fy[k, self.y0 + p] = -(n - 1)
        ub_rows.append(Fy.tocsr())
        ub_rhs.append(np.zeros(2 * m))
        D = _incidence(n, pairs)
        # cutting planes and row-nonzero floor
        ub_rows += [-cols(self.x0, np.ones((1, m))), -cols(self.y0, np.ones((1, m))),
                    -cols(self.x0, D), -cols(self.y0, D)]
        ub_rhs += [np.array([-float(n)]), np.array([-float(n - 1)]),
                   np.full(n, -2.0), np.full(n, -1.0)]
        if min_row_nonzeros:
            ub_rows.append(-cols(self.y0, D))
            ub_rhs.append(np.full(n, -float(min_row_nonzeros)))
        h = np.full(n, -1.0)
        h[0] = n - 1
        eq_rows = [cols(self.f0, F),
                   # Z rows sum to zero: sum_j zneg_ij = Z_ii = delta
                   cols(self.z0, D) - cols(self.d0, np.ones((n, 1)))]
        eq_rhs = [h, np.zeros(n)]
        self.A_ub = sp.vstack(ub_rows).tocsr()
        self.b_ub = np.concatenate(ub_rhs)
        self.A_eq = sp.vstack(eq_rows).tocsr()
        self.b_eq = np.concatenate(eq_rhs)
        lo = np.zeros(nv)
        hi = np.full(nv, np.inf)
        hi[:2 * m] = 1.0
        hi[self.z0:self.z0 + m] = 2 + eps
        lo[self.d0], hi[self.d0] = 2 - eps, 2 + eps
        self.lo, self.hi = lo, hi
        self.forced = forced
        self.c = np.zeros(nv)
        self.c[self.b0] = 1.0

    def relax(self, fix) -> Relaxation:
        lo, hi = self.lo.copy(), self.hi.copy()
        for k, b in {**self.forced, **fix}.items():
            lo[k] = hi[k] = b
        res = linprog(self.c, A_ub=self.A_ub, b_ub=self.b_ub, A_eq=self.A_eq, b_eq=self.b_eq,
                      bounds=np.column_stack([lo, hi]), method="highs")
        if res.status == 2:
            return Relaxation("infeasible")
        if res.status != 0:
            return Relaxation("failed")
        u = res.x
        bits = np.clip(u[:2 * self.m], 0, 1)
        return Relaxation("optimal", float(res.fun), bits, {"bits": bits, "u": u})

    def zneg_for(self, bits):
        """Feasible -Z off-diagonal values on a fixed pattern (None if none exist)."""
        fix = {k: float(round(b)) for k, b in enumerate(bits)}
        lo, hi = self.lo.copy(), self.hi.copy()
        for k, b in fix.items():
            lo[k] = hi[k] = b
        lo[self.s0:], hi[self.s0:] = 0.0, 0.0
        # drop schedule rows: they only involve s, b and the bits
        keep = np.asarray(np.abs(self.A_ub[:, self.s0:]).sum(axis=1)).ravel() == 0
        res = linprog(np.zeros(self.nv), A_ub=self.A_ub[keep], b_ub=self.b_ub[keep],
                      A_eq=self.A_eq, b_eq=self.b_eq, bounds=np.column_stack([lo, hi]),
                      method="highs")
        if res.status != 0:
            return None
        return res.x[self.z0:self.z0 + self.m], float(res.x[self.d0])

    def design_from(self, bits, zneg, delta, gamma):
        n = self.n
        Z = np.eye(n) * delta
        W = np.zeros((n, n))
        for p, (i, j) in enumerate(self.pairs):
            Z[i, j] = Z[j, i] = -zneg[p] if bits[p] > 0.5 else 0.0
            if bits[self.m + p] > 0.5:
                W[i, j] = W[j, i] = Z[i, j]
        np.fill_diagonal(W, -W.sum(axis=1))
        # the restriction guarantees validity for c = lambda_2(W), not for the default floor
        lam2 = float(np.linalg.eigvalsh(W)[1])
        return Design(n, Z, W, gamma, None, {"c": min(default_c(n), lam2 * (1 - 1e-9))})


def _pattern_ok(n, pairs, bits, min_row_nonzeros):
    m = len(pairs)
    x = bits[:m] > 0.5
    y = bits[m:] > 0.5
    if np.any(y & ~x):
        return False
    ye = [p for k, p in enumerate(pairs) if y[k]]
    xe = [p for k, p in enumerate(pairs) if x[k]]
    if not is_connected(n, ye) or not is_connected(n, xe):
        return False
    D = _incidence(n, pairs).toarray()
    if np.any(D @ x < 2) or np.any(D @ y < max(1, min_row_nonzeros or 0)):
        return False
    return x.sum() >= n and y.sum() >= n - 1


def _prune_edges(n, pairs, bits, score, ok):
    """Greedy local search: drop single edges while the score improves."""
    bits = bits.copy()
    best = score(bits)
    improved = True
    while improved:
        improved = False
        for k in np.flatnonzero(bits > 0.5):
            trial = bits.copy()
            trial[k] = 0
            if k < len(pairs):
                trial[len(pairs) + k] = 0
            if not ok(trial):
                continue
            v = score(trial)
            if v < best - 1e-12:
                bits, best, improved = trial, v, True
                break
    return bits, best


def min_time_design_milp(n: int, timing: TimingModel, r: int | None = None,
                         min_row_nonzeros: int | None = None, cs: ConstraintSet | None = None,
                         gamma: float = DEFAULT_GAMMA, node_budget: int = NODE_BUDGET,
                         time_limit: float | None = None, stage_two: str | None = None,
                         backend: str = "bnb") -> DiscreteResult:
    """Minimum-time design restricted to ``Z_ij <= W_ij <= 0``.

    ``W`` is built afterwards as ``W_ij = y_ij Z_ij``. With ``stage_two`` set
    to a spectral objective name the design SDP is re-solved on the chosen
    pattern. ``backend='highs'`` hands the same model to
    ``scipy.optimize.milp`` as a cross-check.
    """
    prob_def = DiscreteDesignProblem("min_time_milp", n, timing, r, cs=cs,
                                     min_row_nonzeros=min_row_nonzeros)
    cs, r, a, q = prob_def.cs, prob_def.r, prob_def.big_M, prob_def.q
    if min_row_nonzeros is not None and not 0 <= min_row_nonzeros <= n - 1:
        raise ValueError("min_row_nonzeros must lie in [0, n-1]")
    pairs = _pairs(n)
    m = len(pairs)
    model = _MilpModel(n, timing, r, a, q, cs.eps, min_row_nonzeros, _forced_zero_bits(cs, pairs))

    def ok(bits):
        if any(bits[k] != b for k, b in model.forced.items()):
            return False
        return _pattern_ok(n, pairs, bits, min_row_nonzeros)

    def end_of(bits):
        return _end_time(n, pairs, bits, timing, r)[1]

    def candidate(bits):
        if not ok(bits):
            return None
        bits, end = _prune_edges(n, pairs, bits, end_of, ok)
        if model.zneg_for(bits) is None:
            return None
        return max(0.0, end - r * q), {"bits": bits}

    def heuristic(fix, rel):
        bits = (rel.values > 0.5).astype(float)
        bits[:m] = np.maximum(bits[:m], bits[m:])
        c = candidate(bits)
        return [c] if c else []

    seeds = []
    for d in _seed_designs(n, cs, gamma):
        bits = _bits_of_design(d, pairs)
        c = candidate(bits)
        if c:
            seeds.append(c)
    full = np.ones(2 * m)
    c = candidate(full)
    if c:
        seeds.append(c)

    if backend == "highs":
        res = _solve_highs(model, time_limit)
    elif backend == "bnb":
        res = branch_and_bound(model.relax, 2 * m, heuristic, seeds, node_budget=node_budget,
                               time_limit=time_limit)
    else:
        raise ValueError("backend must be 'bnb' or 'highs'")
    if res.payload is None:
        raise InfeasibleDesignError("infeasible: no sign-restricted design", "min_time_milp",
                                    {"log": res.log})
    bits = np.round(res.payload["bits"])
    zn = model.zneg_for(bits)
    if zn is None:
        raise SolverFailureError("no edge weights for the chosen pattern")
    design = model.design_from(bits, zn[0], zn[1], gamma)
    rep = validate(design, tol=1e-6)
    if not rep.passed:
        raise SolverFailureError("MILP design failed validation:\n" + rep.summary())
    if stage_two:
        lam2 = float(np.linalg.eigvalsh(design.W)[1])
        c2 = min(default_c(n), lam2) * 0.99
        d2 = _design_on_pattern(cs, pairs, _bits_of_design(design, pairs), stage_two, gamma, c=c2)
        if d2 is not None:
            design = d2
    res.payload = {"bits": bits, "design": design}
    out = _finish_time_design(res, n, cs, pairs, timing, r, q, gamma, None, "min_time_milp")
    out.design.meta["stage_two"] = stage_two
    return out


def _solve_highs(model: _MilpModel, time_limit):
    from scipy.optimize import Bounds, LinearConstraint, milp

    lo, hi = model.lo.copy(), model.hi.copy()
    for k, b in model.forced.items():
        lo[k] = hi[k] = b
    integrality = np.zeros(model.nv)
    integrality[:2 * model.m] = 1
    opts = {"time_limit": time_limit} if time_limit else {}
    res = milp(model.c, integrality=integrality, bounds=Bounds(lo, hi),
               constraints=[LinearConstraint(model.A_ub, -np.inf, model.b_ub),
                            LinearConstraint(model.A_eq, model.b_eq, model.b_eq)], options=opts)
    if res.x is None:
        return BnBResult("infeasible", None, None, 0, math.inf, [res.message])
    status = "optimal" if res.status == 0 else "suboptimal"
    return BnBResult(status, float(res.fun), {"bits": res.x[:2 * model.m]}, 0,
                     float(res.fun), [res.message])
