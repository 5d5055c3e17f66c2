"""Desk-scale versions of the numerical experiments, plus CSV/SVG writers."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .design import Design, preset
from .discrete import min_time_design_milp
from .pep import certify
from .sched import TimingModel, compute_schedule, iteration_stats
from .sdpdesign import dblock_constraints, solve_design

CLASS1 = {"mu": 1.0, "lip": 2.0}


def class2(n: int, position: str = "last", mu: float = 1.0, lip: float = 2.0):
    """Per-operator (mu, lip) with one unrestricted monotone operator."""
    mus = [mu] * n
    lips = [lip] * n
    k = 0 if position == "first" else n - 1
    mus[k], lips[k] = 0.0, math.inf
    return mus, lips


# Printed two-decimal matrices for the six-machine cluster: two groups of
# three with fast links inside a group and one slow link between 1 and 4.
CLUSTER_W = np.array([
    [1.86, -0.52, -0.52, -0.83, 0.00, 0.00],
    [-0.52, 1.33, -0.81, 0.00, 0.00, 0.00],
    [-0.52, -0.81, 1.33, 0.00, 0.00, 0.00],
    [-0.83, 0.00, 0.00, 1.86, -0.52, -0.52],
    [0.00, 0.00, 0.00, -0.52, 1.33, -0.81],
    [0.00, 0.00, 0.00, -0.52, -0.81, 1.33]])
CLUSTER_Z = np.array([
    [2.00, -0.56, -0.56, -0.88, 0.00, 0.00],
    [-0.56, 2.00, -1.44, 0.00, 0.00, 0.00],
    [-0.56, -1.44, 2.00, 0.00, 0.00, 0.00],
    [-0.88, 0.00, 0.00, 2.00, -0.56, -0.56],
    [0.00, 0.00, 0.00, -0.56, 2.00, -1.44],
    [0.00, 0.00, 0.00, -0.56, -1.44, 2.00]])
CLUSTER_LINKS = [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (0, 3)]


def cluster_design(gamma: float = 0.5) -> Design:
    return Design(6, CLUSTER_Z.copy(), CLUSTER_W.copy(), gamma, None, {"source": "cluster"})


def cluster_constraints():
    from .sdpdesign import ConstraintSet

    missing = [(i, j) for i in range(6) for j in range(i + 1, 6) if (i, j) not in CLUSTER_LINKS]
    return ConstraintSet(6, z_zero=missing, w_zero=missing)


def cluster_timing(t: float = 16.0, fast: float = 0.25, slow: float = 10.0) -> TimingModel:
    l = np.full((6, 6), slow)
    for i, j in CLUSTER_LINKS:
        l[i, j] = l[j, i] = fast
    l[0, 3] = l[3, 0] = slow
    return TimingModel(np.full(6, t), l)


def two_block(n: int, objective: str = "min_resistance") -> Design | None:
    """Balanced 2-Block design; None for odd n (the split is infeasible)."""
    if n % 2:
        return None
    return solve_design(objective, dblock_constraints(n, (n // 2, n // 2)))


def odd_baseline(n: int) -> Design:
    """(n-1)/2, (n-1)/2, 1 block design used for odd n."""
    h = (n - 1) // 2
    return solve_design("min_resistance", dblock_constraints(n, (h, h, 1)))


def block_baseline(n: int) -> Design:
    return two_block(n) if n % 2 == 0 else odd_baseline(n)


def tau_of(design: Design, mu, lip, gamma=None, tune=False) -> tuple[float, float]:
    cert = certify(design, "d", gamma=gamma, mu=mu, lip=lip, optimize="gamma" if tune else None)
    return float(cert.tau), float(cert.gamma)


@dataclass
class ExperimentResult:
    name: str
    columns: list
    rows: list = field(default_factory=list)
    series: dict = field(default_factory=dict)  # name -> (xs, ys)
    xlabel: str = "n"
    ylabel: str = "tau"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow(["" if v is None else v for v in row])
        return buf.getvalue()

    def to_svg(self) -> str:
        return line_chart(self.series, self.name, self.xlabel, self.ylabel, self.to_csv())


def _designs_for(n):
    out = {"fully_connected": preset("fully_connected", n), "mt": preset("mt", n)}
    tb = two_block(n)
    if tb is not None:
        out["two_block"] = tb
    return out


def _tau_table(name, ns, tune):
    res = ExperimentResult(name, ["n", "design", "tau", "gamma"])
    for n in ns:
        for label, d in _designs_for(n).items():
            tau, g = tau_of(d, CLASS1["mu"], CLASS1["lip"], gamma=0.5, tune=tune)
            res.rows.append([n, label, tau, g])
            xs, ys = res.series.setdefault(label, ([], []))
            xs.append(n)
            ys.append(tau)
    return res


def fixed_gamma(ns=range(3, 9)) -> ExperimentResult:
    return _tau_table("fixed-gamma", ns, tune=False)


def opt_gamma(ns=range(3, 9)) -> ExperimentResult:
    return _tau_table("opt-gamma", ns, tune=True)


def ordering(ns=(4, 6, 8)) -> ExperimentResult:
    """Class 2 with the unrestricted operator placed first or last."""
    res = ExperimentResult("ordering", ["n", "design", "position", "tau", "gamma"])
    for n in ns:
        designs = {"ryu_ext": preset("ryu_ext", n), **_designs_for(n)}
        for label, d in designs.items():
            for pos in ("first", "last"):
                mu, lip = class2(n, pos)
                tau, g = tau_of(d, mu, lip, tune=True)
                res.rows.append([n, label, pos, tau, g])
                xs, ys = res.series.setdefault(f"{label} ({pos})", ([], []))
                xs.append(n)
                ys.append(tau)
    return res


def block_size(ns=(6, 8, 9, 10)) -> ExperimentResult:
    """tau of equal-size d-Block designs, Class 1, tuned step."""
    res = ExperimentResult("block-size", ["n", "d", "tau", "gamma"], xlabel="d")
    for n in ns:
        for d in range(2, n + 1):
            if n % d:
                continue
            design = solve_design("min_resistance", dblock_constraints(n, (n // d,) * d))
            tau, g = tau_of(design, CLASS1["mu"], CLASS1["lip"], tune=True)
            res.rows.append([n, d, tau, g])
            xs, ys = res.series.setdefault(f"n={n}", ([], []))
            xs.append(d)
            ys.append(tau)
    return res


def time_to(target: float, tau: float, per_iter: float) -> float:
    if tau <= 0:
        return per_iter
    if tau >= 1:
        return math.inf
    return per_iter * math.log(target) / math.log(tau)


def sparsity_sweep(n: int = 8, t: float = 1.0, l: float = 0.25) -> ExperimentResult:
    """Time to halve the error against the number of blocks, constant times."""
    res = ExperimentResult("sparsity-sweep", ["n", "d", "edges_w", "tau", "c_inf", "time_to_half"],
                           xlabel="d", ylabel="time to 0.5 contraction")
    timing = TimingModel.constant(n, t, l)
    xs, ys = res.series.setdefault(f"n={n}", ([], []))
    for d in range(2, n + 1):
        if n % d:
            continue
        design = solve_design("min_resistance", dblock_constraints(n, (n // d,) * d))
        tau, _ = tau_of(design, CLASS1["mu"], CLASS1["lip"], tune=True)
        ci = iteration_stats(compute_schedule(design, timing, 2 * n))["c_inf"]
        iu = np.triu_indices(n, 1)
        ew = int(np.sum(np.abs(design.W[iu]) > 1e-6))
        tt = time_to(0.5, tau, ci)
        res.rows.append([n, d, ew, tau, ci, tt])
        xs.append(d)
        ys.append(tt)
    full = preset("fully_connected", n)
    tau, _ = tau_of(full, CLASS1["mu"], CLASS1["lip"], tune=True)
    ci = iteration_stats(compute_schedule(full, timing, 2 * n))["c_inf"]
    res.rows.append([n, "full", n * (n - 1) // 2, tau, ci, time_to(0.5, tau, ci)])
    return res


def convergence_time(design: Design, timing: TimingModel, target: float = 0.01, r: int | None = None):
    """(time to reach ``target`` contraction, c_inf, tau) under Class 2 at tuned step."""
    n = design.n
    mu, lip = class2(n, "last")
    tau, _ = tau_of(design, mu, lip, tune=True)
    ci = iteration_stats(compute_schedule(design, timing, r or 2 * n))["c_inf"]
    return time_to(target, tau, ci), ci, tau


def min_time_trial(n: int, seed: int, time_limit: float = 60.0, stage_two: str | None = "min_resistance",
                   baseline: Design | None = None):
    timing = TimingModel.random(n, seed)
    base = baseline if baseline is not None else block_baseline(n)
    res = min_time_design_milp(n, timing, r=n, min_row_nonzeros=n // 2,
                               time_limit=time_limit, stage_two=stage_two)
    return convergence_time(base, timing), convergence_time(res.design, timing), res


def min_time_vs_block(ns=(6, 7), trials: int = 10, time_limit: float = 60.0,
                      stage_two: str | None = "min_resistance", progress=None) -> ExperimentResult:
    res = ExperimentResult("min-time-vs-block",
                           ["n", "seed", "block_time", "block_c_inf", "block_tau",
                            "min_time_time", "min_time_c_inf", "min_time_tau", "bnb_status"],
                           ylabel="mean time to 0.01 contraction")
    for n in ns:
        base = block_baseline(n)
        bsum = msum = 0.0
        for seed in range(trials):
            b, m, r = min_time_trial(n, seed, time_limit, stage_two, base)
            res.rows.append([n, seed, *b, *m, r.status])
            bsum += b[0]
            msum += m[0]
            if progress:
                progress(n, seed, b, m)
        for label, v in (("d-Block", bsum), ("min-time", msum)):
            xs, ys = res.series.setdefault(label, ([], []))
            xs.append(n)
            ys.append(v / trials)
    return res


EXPERIMENTS = {
    "fixed-gamma": fixed_gamma,
    "opt-gamma": opt_gamma,
    "ordering": ordering,
    "block-size": block_size,
    "sparsity-sweep": sparsity_sweep,
    "min-time-vs-block": min_time_vs_block,
}


# --------------------------------------------------------------------------
# SVG
# --------------------------------------------------------------------------


def line_chart(series: dict, title: str, xlabel: str, ylabel: str, data_csv: str = "") -> str:
    """Plain SVG line chart; the data table rides along as a comment."""
    width, height, pad = 640.0, 400.0, 60.0
    pts = [(x, y) for xs, ys in series.values() for x, y in zip(xs, ys)
           if y is not None and math.isfinite(y)]
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    sx = lambda x: pad + (x - x0) / (x1 - x0) * (width - 2 * pad)
    sy = lambda y: height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)
    colors = ["#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2", "#b279a2", "#9d755d", "#bab0ac"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
           f'font-family="sans-serif" font-size="11">',
           "<!-- data\n" + data_csv.replace("--", "- -") + "-->",
           f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
           f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="#333"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="#333"/>',
           f'<text x="{width / 2:.0f}" y="{height - 15:.0f}" text-anchor="middle">{xlabel}</text>',
           f'<text x="15" y="{height / 2:.0f}" transform="rotate(-90 15 {height / 2:.0f})" '
           f'text-anchor="middle">{ylabel}</text>']
    for k in range(5):
        yv = y0 + (y1 - y0) * k / 4
        xv = x0 + (x1 - x0) * k / 4
        out.append(f'<text x="{pad - 5}" y="{sy(yv) + 4:.1f}" text-anchor="end">{yv:.3g}</text>')
        out.append(f'<text x="{sx(xv):.1f}" y="{height - pad + 15}" text-anchor="middle">{xv:.3g}</text>')
    for idx, (name, (xs, ys)) in enumerate(series.items()):
        col = colors[idx % len(colors)]
        good = [(x, y) for x, y in zip(xs, ys) if y is not None and math.isfinite(y)]
        if good:
            path = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in good)
            out.append(f'<polyline points="{path}" fill="none" stroke="{col}" stroke-width="2"/>')
            out += [f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="3" fill="{col}"/>' for x, y in good]
        out.append(f'<text x="{width - pad + 5:.0f}" y="{pad + 15 * idx:.0f}" fill="{col}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
