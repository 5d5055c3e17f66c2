"""Execution schedules of designs under computation/communication timings."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

ZERO_THRESHOLD = 1e-6


@dataclass
class TimingModel:
    """Resolvent times ``t`` and symmetric pairwise latencies ``l``."""

    t: np.ndarray
    l: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float).ravel()
        self.l = np.asarray(self.l, dtype=float)
        n = self.t.size
        if self.l.shape != (n, n):
            raise ValueError(f"latency matrix must be {n}x{n}")
        if np.any(self.t <= 0):
            raise ValueError("computation times must be positive")
        if np.max(np.abs(self.l - self.l.T)) > 1e-12:
            raise ValueError("latencies must be symmetric")
        off = self.l[~np.eye(n, dtype=bool)]
        if np.any(off <= 0):
            raise ValueError("off-diagonal latencies must be positive")
        self.l = self.l.copy()
        np.fill_diagonal(self.l, 0.0)

    @property
    def n(self) -> int:
        return self.t.size

    @classmethod
    def constant(cls, n: int, t: float, l: float) -> "TimingModel":
        return cls(np.full(n, float(t)), np.full((n, n), float(l)))

    def constant_latency(self) -> float | None:
        off = self.l[~np.eye(self.n, dtype=bool)]
        return float(off[0]) if off.size and np.ptp(off) == 0 else None

    def to_dict(self) -> dict:
        return {"t": self.t.tolist(), "l": self.l.tolist()}

    @classmethod
    def from_dict(cls, obj: dict) -> "TimingModel":
        t = obj["t"]
        l = obj["l"]
        if np.isscalar(l):
            l = np.full((len(t), len(t)), float(l))
        return cls(t, l)

    @classmethod
    def from_json(cls, text: str) -> "TimingModel":
        return cls.from_dict(json.loads(text))

    @classmethod
    def random(cls, n: int, seed: int = 0, t_range=(0.5, 2.0), l_range=(1.0, 11.0)) -> "TimingModel":
        rng = np.random.default_rng(seed)
        t = rng.uniform(*t_range, size=n)
        U = rng.uniform(*l_range, size=(n, n))
        l = np.triu(U, 1)
        return cls(t, l + l.T + np.eye(n))


@dataclass
class Schedule:
    s: np.ndarray  # r x n start times
    e: np.ndarray  # r end times
    L_pattern: np.ndarray
    W_pattern: np.ndarray

    @property
    def r(self) -> int:
        return self.s.shape[0]

    @property
    def c(self) -> np.ndarray:
        return self.e / np.arange(1, self.r + 1) if self.r else np.zeros(0)


def _patterns(design_or_L, W=None, zero_threshold=ZERO_THRESHOLD):
    if W is None:
        L, W = design_or_L.L, design_or_L.W
    else:
        L = design_or_L
    Lp = np.abs(np.tril(np.asarray(L, dtype=float), -1)) > zero_threshold
    Wp = np.abs(np.asarray(W, dtype=float)) > zero_threshold
    Wp = Wp | Wp.T
    np.fill_diagonal(Wp, True)
    return Lp, Wp


def compute_schedule(design_or_L, timing: TimingModel, r: int, W=None,
                     zero_threshold: float = ZERO_THRESHOLD) -> Schedule:
    """Earliest start times for ``r`` iterations.

    Pass a :class:`Design` or the pair ``(L, W)``. Within an iteration
    resolvent i waits for every j < i with ``L_ij != 0``; across iterations
    it waits for every j with ``W_ij != 0`` (itself included, with no
    latency). The first iteration sees only the within-iteration waits.
    """
    Lp, Wp = _patterns(design_or_L, W, zero_threshold)
    n = Lp.shape[0]
    t, l = timing.t, timing.l
    s = np.zeros((r, n))
    for k in range(r):
        for i in range(n):
            best = 0.0
            if k > 0:
                for j in np.flatnonzero(Wp[i]):
                    best = max(best, s[k - 1, j] + t[j] + l[j, i])
            for j in np.flatnonzero(Lp[i, :i]):
                best = max(best, s[k, j] + t[j] + l[j, i])
            s[k, i] = best
    tail = np.array([max([l[i, j] for j in np.flatnonzero(Wp[i]) if j != i], default=0.0)
                     for i in range(n)])
    e = np.array([np.max(s[k] + t + tail) for k in range(r)])
    return Schedule(s, e, Lp, Wp)


def lower_bound_q(timing: TimingModel, constant_l: float | None = None) -> float:
    """Single-iteration time bound.

    With a constant latency this is ``max t + min t + 2 l``; otherwise the
    heuristic ``max_i(t_i + min_j l_ij) + min_i(t_i + min_j l_ij)``.
    """
    t = timing.t
    if constant_l is not None:
        return float(t.max() + t.min() + 2 * constant_l)
    n = timing.n
    off = np.where(np.eye(n, dtype=bool), np.inf, timing.l)
    a = t + off.min(axis=1)
    return float(a.max() + a.min())


def iteration_stats(schedule: Schedule) -> dict:
    r = schedule.r
    out = {"c1": float(schedule.e[0]) if r else None, "c": schedule.c.tolist(), "c_inf": None}
    if r >= 2:
        m = max(math.ceil(r / 2), 2)
        k = np.arange(r - m + 1, r + 1)
        slope = np.polyfit(k, schedule.e[r - m:], 1)[0]
        out["c_inf"] = float(slope)
    return out


# --------------------------------------------------------------------------
# exports
# --------------------------------------------------------------------------


def gantt_rows(schedule: Schedule, timing: TimingModel):
    for k in range(schedule.r):
        for i in range(schedule.s.shape[1]):
            yield k + 1, i + 1, float(schedule.s[k, i]), float(schedule.s[k, i] + timing.t[i])


def export_gantt(schedule: Schedule, timing: TimingModel, fmt: str = "csv") -> str:
    """CSV (iter,resolvent,start,end) or an SVG timeline."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "resolvent", "start", "end"])
        for row in gantt_rows(schedule, timing):
            w.writerow([row[0], row[1], repr(row[2]), repr(row[3])])
        return buf.getvalue()
    if fmt != "svg":
        raise ValueError("format must be 'svg' or 'csv'")
    n = schedule.s.shape[1]
    end = float(schedule.e[-1]) if schedule.r else 1.0
    width, band, left = 900.0, 28.0, 60.0
    sx = (width - left - 20) / max(end, 1e-12)
    height = band * n + 50
    colors = ["#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2", "#b279a2", "#ff9da6", "#9d755d"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
             f'font-family="sans-serif" font-size="11">',
             '<defs><marker id="arr" markerWidth="6" markerHeight="6" refX="5" refY="3" orient="auto">'
             '<path d="M0,0 L6,3 L0,6 z" fill="#555"/></marker></defs>']
    for i in range(n):
        y = 20 + i * band
        parts.append(f'<text x="5" y="{y + band / 2 + 4:.1f}">x{i + 1}</text>')
        parts.append(f'<line x1="{left}" y1="{y + band:.1f}" x2="{width - 20}" y2="{y + band:.1f}" stroke="#ddd"/>')
    pos = lambda i, tt: (left + tt * sx, 20 + i * band + band / 2)
    for k, i, a, b in gantt_rows(schedule, timing):
        x0, y = pos(i - 1, a)
        parts.append(f'<rect x="{x0:.2f}" y="{y - band * 0.35:.2f}" width="{(b - a) * sx:.2f}" '
                     f'height="{band * 0.7:.2f}" fill="{colors[(k - 1) % len(colors)]}" opacity="0.85">'
                     f'<title>iter {k} resolvent {i}: {a:.4g}-{b:.4g}</title></rect>')
    Lp, Wp = schedule.L_pattern, schedule.W_pattern
    for k in range(schedule.r):
        for i in range(n):
            done = schedule.s[k, i] + timing.t[i]
            targets = [(k, j, "#1f77b4") for j in range(i + 1, n) if Lp[j, i]]
            if k + 1 < schedule.r:
                targets += [(k + 1, j, "#ff7f0e") for j in range(n) if Wp[i, j] and j != i]
            for kk, j, col in targets:
                x0, y0 = pos(i, done)
                x1, y1 = pos(j, done + timing.l[i, j])
                parts.append(f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" y2="{y1:.2f}" '
                             f'stroke="{col}" stroke-width="0.8" marker-end="url(#arr)"/>')
    ticks = 10
    for q in range(ticks + 1):
        tt = end * q / ticks
        x = left + tt * sx
        parts.append(f'<text x="{x:.1f}" y="{height - 8:.1f}" text-anchor="middle">{tt:.3g}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def activity_network(design_or_L, W=None, zero_threshold: float = ZERO_THRESHOLD) -> dict:
    """Typed dependency edges: 'within' from L, 'between' from W (1-based)."""
    Lp, Wp = _patterns(design_or_L, W, zero_threshold)
    n = Lp.shape[0]
    within = [{"from": j + 1, "to": i + 1} for i in range(n) for j in range(i) if Lp[i, j]]
    between = [{"a": i + 1, "b": j + 1} for i in range(n) for j in range(i + 1, n) if Wp[i, j]]
    return {"nodes": list(range(1, n + 1)), "within": within, "between": between}


def export_activity_network(design_or_L, W=None, fmt: str = "json") -> str:
    net = activity_network(design_or_L, W)
    if fmt == "json":
        return json.dumps(net, indent=2)
    if fmt == "dot":
        lines = ["digraph activity {", "  rankdir=LR;"]
        lines += [f"  x{v};" for v in net["nodes"]]
        lines += [f'  x{e["from"]} -> x{e["to"]} [color=blue, label="within"];' for e in net["within"]]
        lines += [f'  x{e["a"]} -> x{e["b"]} [color=orange, dir=both, label="between"];'
                  for e in net["between"]]
        return "\n".join(lines + ["}"]) + "\n"
    raise ValueError("format must be 'json' or 'dot'")
