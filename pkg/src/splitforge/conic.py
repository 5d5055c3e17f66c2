"""Small conic modeling layer with a Clarabel backend.

Problems are linear objectives over scalar, vector and symmetric-matrix
variables subject to equality, entrywise-nonnegativity and PSD constraints.
Every expression is affine in the decision variables and is stored as a
sparse coefficient map plus a constant, both in row-major flattened order.

PSD constraints are handed to the solver in scaled lower-triangular
vectorized form: row-wise lower triangle, off-diagonals multiplied by
``sqrt(2)`` so that the Frobenius inner product is preserved.
"""
from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.sparse as sp

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200
SQRT2 = math.sqrt(2.0)


def solver_tolerance(tol: float | None = None) -> float:
    """Resolve the conic tolerance, honouring ``SPLITFORGE_SOLVER_TOL``."""
    if tol is not None:
        return float(tol)
    env = os.environ.get("SPLITFORGE_SOLVER_TOL")
    if env:
        return float(env)
    return DEFAULT_TOL


# --------------------------------------------------------------------------
# variables and affine expressions
# --------------------------------------------------------------------------


class Variable:
    """Decision variable block. ``kind`` is 'scalar', 'vector' or 'symmetric'."""

    _counter = 0

    def __init__(self, kind: str, dim: int = 1, name: str | None = None):
        if kind not in ("scalar", "vector", "symmetric"):
            raise ValueError(f"unknown variable kind {kind!r}")
        Variable._counter += 1
        self.uid = Variable._counter
        self.kind = kind
        self.dim = 1 if kind == "scalar" else int(dim)
        self.name = name or f"v{self.uid}"
        if kind == "symmetric":
            self.size = self.dim * (self.dim + 1) // 2
            self.shape = (self.dim, self.dim)
        elif kind == "vector":
            self.size = self.dim
            self.shape = (self.dim, 1)
        else:
            self.size = 1
            self.shape = (1, 1)

    def expr(self) -> "Affine":
        rows, cols = self.shape
        if self.kind == "symmetric":
            k = self.dim
            r, c = [], []
            for i in range(k):
                for j in range(k):
                    a, b = (i, j) if i >= j else (j, i)
                    r.append(i * k + j)
                    c.append(a * (a + 1) // 2 + b)
            coef = sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(k * k, self.size))
        else:
            coef = sp.identity(self.size, format="csr")
        return Affine((rows, cols), {self: coef}, np.zeros(rows * cols))

    def __repr__(self) -> str:
        return f"Variable({self.kind}, {self.dim}, {self.name!r})"

    def __hash__(self) -> int:
        return self.uid

    # arithmetic is delegated to the expression form
    def __add__(self, o):
        return self.expr() + o

    def __radd__(self, o):
        return self.expr() + o

    def __sub__(self, o):
        return self.expr() - o

    def __rsub__(self, o):
        return as_affine(o) - self.expr()

    def __neg__(self):
        return -self.expr()

    def __mul__(self, o):
        return self.expr() * o

    def __rmul__(self, o):
        return self.expr() * o

    def __matmul__(self, o):
        return self.expr() @ o

    def __rmatmul__(self, o):
        return o @ self.expr()

    def __getitem__(self, idx):
        return self.expr()[idx]

    @property
    def T(self):
        return self.expr().T


def as_affine(x) -> "Affine":
    if isinstance(x, Affine):
        return x
    if isinstance(x, Variable):
        return x.expr()
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return Affine(arr.shape, {}, arr.ravel().copy())


def _merge(a: dict, b: dict, sb: float = 1.0) -> dict:
    out = dict(a)
    for v, c in b.items():
        out[v] = out[v] + sb * c if v in out else sb * c
    return out


class Affine:
    """Affine matrix expression ``sum_v C_v x_v + c`` (row-major)."""

    __array_priority__ = 100

    def __init__(self, shape, coefs: dict, const: np.ndarray):
        self.shape = (int(shape[0]), int(shape[1]))
        self.coefs = coefs
        self.const = np.asarray(const, dtype=float)

    @property
    def size(self) -> int:
        return self.shape[0] * self.shape[1]

    def _linmap(self, T: sp.spmatrix, shape) -> "Affine":
        T = sp.csr_matrix(T)
        return Affine(shape, {v: (T @ c).tocsr() for v, c in self.coefs.items()}, T @ self.const)

    def _broadcast(self, other: "Affine") -> tuple["Affine", "Affine"]:
        if self.shape == other.shape:
            return self, other
        if other.shape == (1, 1) and self.size == 1:
            return self, other
        raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")

    def __add__(self, o):
        o = as_affine(o)
        a, b = self._broadcast(o)
        return Affine(a.shape, _merge(a.coefs, b.coefs), a.const + b.const)

    __radd__ = __add__

    def __neg__(self):
        return Affine(self.shape, {v: -c for v, c in self.coefs.items()}, -self.const)

    def __sub__(self, o):
        return self + (-as_affine(o))

    def __rsub__(self, o):
        return as_affine(o) - self

    def __mul__(self, s):
        if isinstance(s, (Affine, Variable)):
            raise TypeError("products of decision variables are not affine")
        arr = np.asarray(s, dtype=float)
        if arr.size > 1 or arr.ndim == 2:
            arr = arr.reshape(-1, 1) if arr.ndim == 1 else arr
            if self.shape == (1, 1):
                # scalar expression times a constant matrix
                return self._linmap(sp.csr_matrix(arr.reshape(-1, 1)), arr.shape)
            if arr.shape != self.shape:
                raise ValueError(f"shape mismatch {self.shape} * {arr.shape}")
            return self._linmap(sp.diags(arr.ravel()), self.shape)
        s = float(arr)
        return Affine(self.shape, {v: s * c for v, c in self.coefs.items()}, s * self.const)

    __rmul__ = __mul__

    def __truediv__(self, s):
        return self * (1.0 / float(s))

    def __matmul__(self, B):
        if isinstance(B, (Affine, Variable)):
            raise TypeError("products of decision variables are not affine")
        B = np.asarray(B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        p, q = self.shape
        if B.shape[0] != q:
            raise ValueError(f"shape mismatch {self.shape} @ {B.shape}")
        T = sp.kron(sp.identity(p), sp.csr_matrix(B.T))
        return self._linmap(T, (p, B.shape[1]))

    def __rmatmul__(self, A):
        A = np.asarray(A, dtype=float)
        if A.ndim == 1:
            A = A.reshape(1, -1)
        p, q = self.shape
        if A.shape[1] != p:
            raise ValueError(f"shape mismatch {A.shape} @ {self.shape}")
        T = sp.kron(sp.csr_matrix(A), sp.identity(q))
        return self._linmap(T, (A.shape[0], q))

    @property
    def T(self) -> "Affine":
        p, q = self.shape
        perm = np.arange(p * q).reshape(p, q).T.ravel()
        T = sp.csr_matrix((np.ones(p * q), (np.arange(p * q), perm)), shape=(p * q, p * q))
        return self._linmap(T, (q, p))

    def __getitem__(self, idx) -> "Affine":
        if not isinstance(idx, tuple):
            idx = (idx, 0) if self.shape[1] == 1 else (idx, slice(None))
        grid = np.arange(self.size).reshape(self.shape)
        sel = np.asarray(grid[idx])
        if sel.ndim == 0:
            sel = sel.reshape(1, 1)
        elif sel.ndim == 1:
            sel = sel.reshape(1, -1) if np.isscalar(idx[0]) else sel.reshape(-1, 1)
        flat = sel.ravel()
        T = sp.csr_matrix((np.ones(flat.size), (np.arange(flat.size), flat)),
                          shape=(flat.size, self.size))
        return self._linmap(T, sel.shape)

    def sum(self) -> "Affine":
        return self._linmap(sp.csr_matrix(np.ones((1, self.size))), (1, 1))

    def trace(self) -> "Affine":
        p, q = self.shape
        if p != q:
            raise ValueError("trace of a non-square expression")
        cols = [i * q + i for i in range(p)]
        T = sp.csr_matrix((np.ones(p), (np.zeros(p, dtype=int), cols)), shape=(1, self.size))
        return self._linmap(T, (1, 1))

    def diag(self) -> "Affine":
        p, q = self.shape
        cols = [i * q + i for i in range(min(p, q))]
        T = sp.csr_matrix((np.ones(len(cols)), (np.arange(len(cols)), cols)),
                          shape=(len(cols), self.size))
        return self._linmap(T, (len(cols), 1))

    def vdot(self, C) -> "Affine":
        """Frobenius inner product with a constant matrix."""
        C = np.asarray(C, dtype=float).reshape(self.shape)
        return self._linmap(sp.csr_matrix(C.ravel()[None, :]), (1, 1))

    def value(self, x: dict) -> np.ndarray:
        out = self.const.copy()
        for v, c in self.coefs.items():
            out = out + c @ x[v]
        return out.reshape(self.shape)

    def is_constant(self) -> bool:
        return all(c.nnz == 0 for c in self.coefs.values())


def trace(e) -> Affine:
    return as_affine(e).trace()


def vdot(C, e) -> Affine:
    return as_affine(e).vdot(C)


def bmat(blocks: list[list]) -> Affine:
    """Assemble a block expression. ``None`` entries are zero blocks."""
    nr, nc = len(blocks), len(blocks[0])
    heights = [None] * nr
    widths = [None] * nc
    for i, row in enumerate(blocks):
        for j, blk in enumerate(row):
            if blk is None:
                continue
            shp = as_affine(blk).shape
            heights[i] = heights[i] or shp[0]
            widths[j] = widths[j] or shp[1]
            if heights[i] != shp[0] or widths[j] != shp[1]:
                raise ValueError("inconsistent block sizes")
    if any(h is None for h in heights) or any(w is None for w in widths):
        raise ValueError("every block row and column needs one sized block")
    H, Wd = sum(heights), sum(widths)
    roff = np.concatenate([[0], np.cumsum(heights)])
    coff = np.concatenate([[0], np.cumsum(widths)])
    coefs: dict = {}
    const = np.zeros(H * Wd)
    for i, row in enumerate(blocks):
        for j, blk in enumerate(row):
            if blk is None:
                continue
            e = as_affine(blk)
            h, w = e.shape
            rr, cc = np.meshgrid(np.arange(h) + roff[i], np.arange(w) + coff[j], indexing="ij")
            dest = (rr * Wd + cc).ravel()
            T = sp.csr_matrix((np.ones(h * w), (dest, np.arange(h * w))), shape=(H * Wd, h * w))
            placed = e._linmap(T, (H, Wd))
            coefs = _merge(coefs, placed.coefs)
            const += placed.const
    return Affine((H, Wd), coefs, const)


# --------------------------------------------------------------------------
# problem and solution
# --------------------------------------------------------------------------


@dataclass
class _Constraint:
    kind: str  # 'eq' | 'ge' | 'psd'
    expr: Affine
    name: str


@dataclass
class ConicSolution:
    """Result of a conic solve.

    ``status`` is one of 'optimal', 'infeasible', 'unbounded',
    'numerical_failure'. ``inaccurate`` flags a solution accepted at the
    solver's reduced tolerances.
    """

    status: str
    objective: float
    dual_objective: float
    values: dict
    duals: dict
    iterations: int
    primal_residual: float
    dual_residual: float
    solver_status: str
    inaccurate: bool = False
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == "optimal"

    def __getitem__(self, var: Variable):
        return self.value(var)

    def value(self, var) -> float | np.ndarray:
        if isinstance(var, Affine):
            v = var.value(self.values)
            return float(v[0, 0]) if v.shape == (1, 1) else v
        x = self.values[var]
        if var.kind == "scalar":
            return float(x[0])
        if var.kind == "vector":
            return x.copy()
        return var.expr().value(self.values)

    def dual(self, name: str):
        return self.duals[name]


def svec_matrix(k: int) -> sp.csr_matrix:
    """Map row-major vec of a symmetric k x k matrix to its scaled svec."""
    r, c, v = [], [], []
    row = 0
    for i in range(k):
        for j in range(i + 1):
            if i == j:
                r.append(row); c.append(i * k + i); v.append(1.0)
            else:
                # average both triangles so the map is exact on symmetric input
                r += [row, row]; c += [i * k + j, j * k + i]; v += [SQRT2 / 2, SQRT2 / 2]
            row += 1
    return sp.csr_matrix((v, (r, c)), shape=(k * (k + 1) // 2, k * k))


def smat(s: np.ndarray, k: int) -> np.ndarray:
    """Inverse of the scaled svec."""
    X = np.zeros((k, k))
    idx = 0
    for i in range(k):
        for j in range(i + 1):
            if i == j:
                X[i, i] = s[idx]
            else:
                X[i, j] = X[j, i] = s[idx] / SQRT2
            idx += 1
    return X


class ConicProblem:
    """Linear objective plus equality, nonnegativity and PSD constraints."""

    def __init__(self, name: str = "problem"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[_Constraint] = []
        self.objective = as_affine(0.0)
        self.sense = "min"

    # variables -----------------------------------------------------------
    def _add(self, v: Variable) -> Variable:
        self.variables.append(v)
        return v

    def scalar(self, name: str | None = None) -> Variable:
        return self._add(Variable("scalar", 1, name))

    def vector(self, m: int, name: str | None = None) -> Variable:
        return self._add(Variable("vector", m, name))

    def symmetric(self, k: int, name: str | None = None) -> Variable:
        return self._add(Variable("symmetric", k, name))

    # constraints ----------------------------------------------------------
    def _name(self, name, kind):
        return name or f"{kind}{len(self.constraints)}"

    def add_eq(self, lhs, rhs=0.0, name: str | None = None) -> str:
        e = as_affine(lhs) - _match(rhs, as_affine(lhs))
        name = self._name(name, "eq")
        self.constraints.append(_Constraint("eq", e, name))
        return name

    def add_ge(self, lhs, rhs=0.0, name: str | None = None) -> str:
        """Entrywise ``lhs >= rhs``."""
        e = as_affine(lhs) - _match(rhs, as_affine(lhs))
        name = self._name(name, "ge")
        self.constraints.append(_Constraint("ge", e, name))
        return name

    def add_le(self, lhs, rhs=0.0, name: str | None = None) -> str:
        e = as_affine(lhs)
        return self.add_ge(_match(rhs, e) - e, 0.0, name)

    def add_psd(self, expr, name: str | None = None) -> str:
        e = as_affine(expr)
        k, q = e.shape
        if k != q:
            raise ValueError("PSD constraint on a non-square expression")
        P = np.arange(k * k).reshape(k, k).T.ravel()
        for c in list(e.coefs.values()) + [sp.csr_matrix(e.const[:, None])]:
            if c.nnz and abs(c - c[P]).max() > 1e-10:
                raise ValueError("PSD constraint on a non-symmetric expression")
        name = self._name(name, "psd")
        self.constraints.append(_Constraint("psd", e, name))
        return name

    def minimize(self, expr) -> None:
        self.objective, self.sense = as_affine(expr), "min"

    def maximize(self, expr) -> None:
        self.objective, self.sense = as_affine(expr), "max"

    # assembly ---------------------------------------------------------------
    def _offsets(self) -> tuple[dict, int]:
        off, n = {}, 0
        seen = set()
        for c in [self.objective] + [k.expr for k in self.constraints]:
            for v in c.coefs:
                if v not in seen and v not in self.variables:
                    self.variables.append(v)
                seen.add(v)
        for v in self.variables:
            off[v] = n
            n += v.size
        return off, n

    def _rows(self, e: Affine, off: dict, n: int) -> sp.csr_matrix:
        A = sp.csr_matrix((e.size, n))
        for v, c in e.coefs.items():
            c = sp.coo_matrix(c)
            A = A + sp.csr_matrix((c.data, (c.row, c.col + off[v])), shape=(e.size, n))
        return A

    def assemble(self):
        """Return ``(q, A, b, cones, layout)`` for ``A x + s = b, s in K``."""
        off, n = self._offsets()
        q = np.zeros(n)
        obj = self.objective
        sign = 1.0 if self.sense == "min" else -1.0
        for v, c in obj.coefs.items():
            q[off[v]:off[v] + v.size] += sign * np.asarray(c.todense()).ravel()
        blocks_A, blocks_b, layout = [], [], []
        for kind in ("eq", "ge", "psd"):
            for con in self.constraints:
                if con.kind != kind:
                    continue
                C = self._rows(con.expr, off, n)
                c0 = con.expr.const
                if kind == "psd":
                    S = svec_matrix(con.expr.shape[0])
                    C, c0 = S @ C, S @ c0
                blocks_A.append(-C)
                blocks_b.append(c0)
                layout.append((con, C.shape[0]))
        A = sp.vstack(blocks_A, format="csc") if blocks_A else sp.csc_matrix((0, n))
        b = np.concatenate(blocks_b) if blocks_b else np.zeros(0)
        return q, A, b, layout, off, n, sign

    def solve(self, tol: float | None = None, max_iter: int = DEFAULT_MAX_ITER,
              verbose: bool = False) -> ConicSolution:
        """Solve with Clarabel (an external interior-point solver)."""
        import clarabel

        tol = solver_tolerance(tol)
        q, A, b, layout, off, n, sign = self.assemble()
        cones = []
        neq = sum(m for con, m in layout if con.kind == "eq")
        nge = sum(m for con, m in layout if con.kind == "ge")
        if neq:
            cones.append(clarabel.ZeroConeT(neq))
        if nge:
            cones.append(clarabel.NonnegativeConeT(nge))
        for con, m in layout:
            if con.kind == "psd":
                cones.append(clarabel.PSDTriangleConeT(con.expr.shape[0]))
        st = clarabel.DefaultSettings()
        st.verbose = verbose
        st.max_iter = int(max_iter)
        st.tol_gap_abs = tol
        st.tol_gap_rel = tol
        st.tol_feas = tol
        st.tol_ktratio = max(1e-6, tol)
        P = sp.csc_matrix((n, n))
        solver = clarabel.DefaultSolver(P, q, A, b, cones, st)
        sol = solver.solve()
        raw = str(sol.status)
        status, inaccurate = _STATUS.get(raw, ("numerical_failure", False))
        x = np.asarray(sol.x, dtype=float)
        z = np.asarray(sol.z, dtype=float)
        values = {v: x[off[v]:off[v] + v.size] for v in self.variables}
        duals, pos = {}, 0
        for con, m in layout:
            seg = z[pos:pos + m]
            duals[con.name] = smat(seg, con.expr.shape[0]) if con.kind == "psd" else seg.reshape(con.expr.shape)
            pos += m
        obj = sign * float(sol.obj_val) + float(self.objective.const[0])
        dobj = sign * float(sol.obj_val_dual) + float(self.objective.const[0])
        out = ConicSolution(status, obj, dobj, values, duals, int(sol.iterations),
                            float(sol.r_prim), float(sol.r_dual), raw, inaccurate)
        if status == "optimal" and abs(obj - dobj) > max(1e3 * tol, 1e-6) * (1 + abs(obj)):
            out.warnings.append(f"duality gap {abs(obj - dobj):.3e} exceeds tolerance")
        return out

    def to_sdpa(self) -> str:
        """Debug dump in SDPA sparse format (equalities as two inequalities)."""
        q, A, b, layout, off, n, sign = self.assemble()
        A = sp.csr_matrix(A)
        blocks, entries, pos = [], [], 0
        lp_rows = []
        for con, m in layout:
            if con.kind == "eq":
                for r in range(pos, pos + m):
                    lp_rows += [(r, 1.0), (r, -1.0)]
            elif con.kind == "ge":
                lp_rows += [(r, 1.0) for r in range(pos, pos + m)]
            pos += m
        if lp_rows:
            blocks.append(-len(lp_rows))
            for t, (r, s) in enumerate(lp_rows):
                # X = sum F_i x_i - F0 with X = s * (b - A x)
                entries.append((0, 1, t + 1, t + 1, -s * b[r]))
                row = A.getrow(r)
                for i, val in zip(row.indices, row.data):
                    entries.append((i + 1, 1, t + 1, t + 1, -s * val))
        pos = 0
        for con, m in layout:
            if con.kind == "psd":
                k = con.expr.shape[0]
                blocks.append(k)
                bno = len(blocks)
                F0 = smat(b[pos:pos + m], k)
                for i in range(k):
                    for j in range(i, k):
                        if F0[i, j] != 0:
                            entries.append((0, bno, i + 1, j + 1, -F0[i, j]))
                sub = sp.csc_matrix(A[pos:pos + m])
                for col in range(n):
                    seg = sub.getcol(col).toarray().ravel()
                    if not seg.any():
                        continue
                    F = smat(seg, k)
                    for i in range(k):
                        for j in range(i, k):
                            if F[i, j] != 0:
                                entries.append((col + 1, bno, i + 1, j + 1, -F[i, j]))
            pos += m
        buf = io.StringIO()
        buf.write(f'"{self.name}"\n{n}\n{len(blocks)}\n')
        buf.write(" ".join(str(s) for s in blocks) + "\n")
        buf.write(" ".join(repr(float(v)) for v in q) + "\n")
        for e in entries:
            buf.write(f"{e[0]} {e[1]} {e[2]} {e[3]} {float(e[4])!r}\n")
        return buf.getvalue()


_STATUS = {
    "Solved": ("optimal", False),
    "AlmostSolved": ("optimal", True),
    "PrimalInfeasible": ("infeasible", False),
    "AlmostPrimalInfeasible": ("infeasible", True),
    "DualInfeasible": ("unbounded", False),
    "AlmostDualInfeasible": ("unbounded", True),
}


def _match(rhs, like: Affine) -> Affine:
    r = as_affine(rhs)
    if r.shape == like.shape:
        return r
    if r.shape == (1, 1) and r.is_constant():
        return as_affine(np.full(like.shape, r.const[0]))
    raise ValueError(f"shape mismatch {like.shape} vs {r.shape}")


def psd_lambda_sum_device(prob: ConicProblem, K, k: int, level, tag: str = "") -> None:
    """Impose ``lambda_1 + lambda_2 (K) >= level`` for a k x k expression K.

    Uses the standard sum-of-smallest-eigenvalues representation with an
    auxiliary scalar ``s`` and PSD matrix ``Y``.
    """
    s = prob.scalar(f"s{tag}")
    Y = prob.symmetric(k, f"Y{tag}")
    prob.add_psd(Y, name=f"Y{tag}_psd")
    prob.add_psd(as_affine(K) + Y - s * np.eye(k), name=f"sumeig{tag}")
    prob.add_ge(2 * s - Y.expr().trace(), level, name=f"sumeig_level{tag}")


def pos_part_indices(k: int) -> Iterable[tuple[int, int]]:
    for i in range(k):
        for j in range(i + 1, k):
            yield i, j
