"""Command-line interface: ``splitforge <command> ...``.

Exit codes: 0 success, 1 solver failure, 2 infeasible design request,
3 unreadable or malformed input, 4 divergence during ``run``.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .design import PRESETS, Design, graph_stats, load_design, preset, save_design, validate
from .discrete import min_edges_design, min_time_design_milp, min_time_design_misdp
from .errors import DivergenceError, InfeasibleDesignError, SolverFailureError, SplitForgeError
from .pep import certify
from .runtime import make_instance, reference_solution, run_d_iteration, run_n_iteration
from .sched import (TimingModel, compute_schedule, export_activity_network, export_gantt,
                    iteration_stats, lower_bound_q)
from .sdpdesign import ConstraintSet, dblock_constraints, solve_design

EXIT_OK, EXIT_SOLVER, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_DIVERGED = 0, 1, 2, 3, 4

OBJECTIVES = {"fiedler": "max_fiedler", "slem": "min_slem", "resistance": "min_resistance",
              "znorm": "min_znorm", "feasibility": "feasibility"}


class InputError(Exception):
    pass


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as e:
        raise InputError(f"file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"malformed JSON in {path}: {e}") from e


def _load_design(path) -> Design:
    _read_json(path)
    try:
        return load_design(path)
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"not a design file: {path}: {e}") from e


def _load_timing(path) -> TimingModel:
    try:
        return TimingModel.from_dict(_read_json(path))
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"bad timing file {path}: {e}") from e


def _floats(text: str):
    vals = [math.inf if v.strip().lower() in ("inf", "infinity") else float(v)
            for v in text.split(",")]
    return vals[0] if len(vals) == 1 else vals


def _write(path, text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_design(args) -> int:
    n = args.n
    if args.preset:
        design = preset(args.preset, n, d=args.d, gamma=args.gamma)
    else:
        if args.constraints:
            try:
                cs = ConstraintSet.from_dict(_read_json(args.constraints), n=n)
            except (KeyError, TypeError, ValueError) as e:
                raise InputError(f"bad constraint file: {e}") from e
        else:
            cs = ConstraintSet(n)
        if args.blocks:
            sizes = tuple(int(b) for b in args.blocks.split(","))
            bcs = dblock_constraints(n, sizes)
            cs = ConstraintSet.from_dict({**cs.to_dict(), "blocks": bcs.to_dict()["blocks"]}, n=n)
        obj = args.objective
        if obj == "min-edges":
            res = min_edges_design(n, cs, gamma=args.gamma, node_budget=args.node_budget,
                                   time_limit=args.time_limit)
            design = res.design
            print(f"edges: Z={res.z_edges} W={res.w_edges} total={res.z_edges + res.w_edges} "
                  f"({res.status}, {res.nodes} nodes)", file=sys.stderr)
        elif obj == "min-time":
            if not args.timing:
                raise InputError("--objective min-time needs --timing")
            timing = _load_timing(args.timing)
            if args.milp:
                res = min_time_design_milp(n, timing, args.iters, args.min_row_nonzeros, cs,
                                           gamma=args.gamma, node_budget=args.node_budget,
                                           time_limit=args.time_limit,
                                           stage_two=args.stage_two)
            else:
                res = min_time_design_misdp(n, timing, args.iters, cs, gamma=args.gamma,
                                            node_budget=args.node_budget,
                                            time_limit=args.time_limit)
            design = res.design
            print(f"end time over {res.schedule.r} iterations: {res.end_time:.6g} "
                  f"({res.status}, {res.nodes} nodes)", file=sys.stderr)
        else:
            design = solve_design(OBJECTIVES[obj], cs, gamma=args.gamma)
    if args.out:
        save_design(design, args.out)
    else:
        sys.stdout.write(design.to_json() + "\n")
    return EXIT_OK


def cmd_analyze(args) -> int:
    design = _load_design(args.design)
    rep = validate(design, tol=args.tol)
    print(rep.summary())
    for name, K in (("Z", design.Z), ("W", design.W)):
        g = graph_stats(K, design.eps)
        print(f"G({name}): edges={g.edge_count} fiedler={g.fiedler:.6g} slem={g.slem:.6g} "
              f"total_resistance={g.total_resistance:.6g}")
    print("valid" if rep.passed else "INVALID")
    return EXIT_OK if rep.passed else EXIT_INFEASIBLE


def cmd_pep(args) -> int:
    design = _load_design(args.design)
    tune = {"gamma": "gamma", "w": "W", None: None}[args.tune]
    if tune == "W" and args.form != "n":
        raise InputError("--tune w needs --form n")
    cert = certify(design, args.form, gamma=args.gamma, mu=_floats(args.mu), lip=_floats(args.lip),
                   optimize=tune, with_primal=args.primal)
    _write(args.out, cert.to_json() + "\n")
    return EXIT_OK


def cmd_schedule(args) -> int:
    design = _load_design(args.design)
    timing = _load_timing(args.timing)
    if timing.n != design.n:
        raise InputError("timing size does not match the design")
    sch = compute_schedule(design, timing, args.iters)
    st = iteration_stats(sch)
    q = lower_bound_q(timing, timing.constant_latency())
    c_inf = "n/a" if st["c_inf"] is None else f"{st['c_inf']:.6g}"
    c1 = "n/a" if st["c1"] is None else f"{st['c1']:.6g}"
    print(f"c1={c1} c_inf={c_inf} q={q:.6g}")
    if sch.r:
        print(f"end of iteration {sch.r}: {sch.e[-1]:.6g}")
    if args.gantt:
        fmt = "csv" if str(args.gantt).endswith(".csv") else "svg"
        Path(args.gantt).write_text(export_gantt(sch, timing, fmt))
    if args.csv:
        Path(args.csv).write_text(export_gantt(sch, timing, "csv"))
    if args.network:
        fmt = "dot" if str(args.network).endswith(".dot") else "json"
        Path(args.network).write_text(export_activity_network(design, fmt=fmt))
    return EXIT_OK


def cmd_run(args) -> int:
    design = _load_design(args.design)
    prob = _read_json(args.problem)
    try:
        kind = prob.get("kind", "class1")
        seed = int(prob.get("seed", args.seed))
        oracles = make_instance(kind, design.n, float(prob.get("mu", 1.0)),
                                float(prob.get("lip", 2.0)), int(prob.get("dim", 2)), seed,
                                prob.get("unrestrictedPosition", "last"))
        gamma = float(prob.get("gamma", design.gamma))
    except (TypeError, ValueError) as e:
        raise InputError(f"bad problem file: {e}") from e
    design = design.with_gamma(gamma)
    dim = int(prob.get("dim", 2))
    rng = np.random.default_rng(seed)
    if args.form == "d":
        from .pep import design_M

        M = design_M(design)
        trace = run_d_iteration(design, oracles, rng.standard_normal((M.shape[0], dim)),
                                max_iters=args.iters, residual_target=args.tol,
                                record_xbar=True, M=M)
    else:
        trace = run_n_iteration(design, oracles, rng.standard_normal((design.n, dim)),
                                max_iters=args.iters, residual_target=args.tol, record_xbar=True)
    x_ref = reference_solution(oracles)
    err = float(np.linalg.norm(trace.xbar[-1] - np.ravel(x_ref)))
    print(f"iterations={trace.iterations} converged={trace.converged} "
          f"residual={trace.residuals[-1]:.3e} error_vs_kkt={err:.3e}")
    if args.trace:
        Path(args.trace).write_text(trace.to_csv())
    return EXIT_OK


def cmd_experiment(args) -> int:
    name = args.name
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lo, hi = args.n_min, min(args.n_max, 10)
    if name in ("fixed-gamma", "opt-gamma"):
        res = experiments.EXPERIMENTS[name](range(lo, hi + 1))
    elif name == "ordering":
        res = experiments.ordering([n for n in range(max(lo, 4), hi + 1) if n % 2 == 0])
    elif name == "block-size":
        res = experiments.block_size(range(max(lo, 4), hi + 1))
    elif name == "sparsity-sweep":
        res = experiments.sparsity_sweep(hi)
    else:
        ns = args.ns or [6, 7]
        res = experiments.min_time_vs_block(
            ns, args.trials, args.time_limit,
            progress=lambda n, s, b, m: print(f"n={n} seed={s} block={b[0]:.4g} "
                                              f"min-time={m[0]:.4g}", file=sys.stderr))
    stem = out_dir / name
    Path(f"{stem}.csv").write_text(res.to_csv())
    Path(f"{stem}.svg").write_text(res.to_svg())
    print(res.to_csv(), end="")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="splitforge",
                                description="Design, certify and schedule frugal resolvent splittings.")
    p.add_argument("--seed", type=int, default=0, help="seed for random instances (default 0)")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", help="build a design and write it as JSON")
    d.add_argument("--n", type=int, required=True, help="number of resolvents")
    d.add_argument("--objective", default="fiedler",
                   choices=sorted(OBJECTIVES) + ["min-edges", "min-time"],
                   help="design objective (default fiedler)")
    d.add_argument("--preset", choices=sorted(PRESETS), help="emit a preset instead of solving")
    d.add_argument("--d", type=int, help="number of blocks for the dblock_mt preset")
    d.add_argument("--blocks", help="comma-separated block sizes, e.g. 2,2")
    d.add_argument("--constraints", help="constraint set JSON (1-based indices)")
    d.add_argument("--timing", help='timing JSON {"t": [...], "l": [[...]]} for min-time')
    d.add_argument("--iters", type=int, help="iterations modeled by min-time (default n)")
    d.add_argument("--milp", action="store_true", help="use the sign-restricted MILP for min-time")
    d.add_argument("--min-row-nonzeros", type=int, help="MILP: minimum W nonzeros per row")
    d.add_argument("--stage-two", choices=["min_resistance", "max_fiedler", "min_slem"],
                   help="MILP: re-solve a spectral objective on the chosen pattern")
    d.add_argument("--node-budget", type=int, default=50_000, help="branch-and-bound node limit")
    d.add_argument("--time-limit", type=float, help="branch-and-bound wall-clock limit (s)")
    d.add_argument("--gamma", type=float, default=0.5, help="step size stored in the design")
    d.add_argument("--out", help="output path (default stdout)")
    d.set_defaults(func=cmd_design)

    a = sub.add_parser("analyze", help="validity report and graph statistics")
    a.add_argument("design")
    a.add_argument("--tol", type=float, default=1e-6, help="validation tolerance")
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("pep", help="worst-case contraction certificate")
    c.add_argument("design")
    c.add_argument("--mu", default="1", help="strong monotonicity, scalar or comma list")
    c.add_argument("--lip", default="2", help="Lipschitz constants, scalar or comma list ('inf' allowed)")
    c.add_argument("--form", choices=["d", "n"], default="d", help="iteration form (default d)")
    c.add_argument("--gamma", type=float, help="step size (default: the design's)")
    c.add_argument("--tune", choices=["gamma", "w"], help="optimize the step or W")
    c.add_argument("--primal", action="store_true", help="also solve the primal and report the gap")
    c.add_argument("--out", help="output path (default stdout)")
    c.set_defaults(func=cmd_pep)

    s = sub.add_parser("schedule", help="start times and Gantt chart for a timing model")
    s.add_argument("design")
    s.add_argument("--timing", required=True, help="timing JSON")
    s.add_argument("--iters", type=int, default=10, help="iterations to schedule")
    s.add_argument("--gantt", help="Gantt output (.svg or .csv)")
    s.add_argument("--csv", help="Gantt CSV output")
    s.add_argument("--network", help="activity network output (.json or .dot)")
    s.set_defaults(func=cmd_schedule)

    r = sub.add_parser("run", help="run the iteration on a synthetic problem")
    r.add_argument("design")
    r.add_argument("--problem", required=True,
                   help='problem JSON {"kind": "class1"|"class2", "mu", "lip", "dim", "seed", "gamma"}')
    r.add_argument("--iters", type=int, default=1000, help="maximum iterations")
    r.add_argument("--tol", type=float, default=1e-10, help="residual target")
    r.add_argument("--form", choices=["n", "d"], default="n", help="iteration form (default n)")
    r.add_argument("--trace", help="CSV trace output")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("experiment", help="reproduce an experiment as CSV + SVG")
    e.add_argument("name", choices=sorted(experiments.EXPERIMENTS))
    e.add_argument("--out-dir", default="results", help="output directory")
    e.add_argument("--n-min", type=int, default=3)
    e.add_argument("--n-max", type=int, default=8, help="largest n (capped at 10)")
    e.add_argument("--ns", type=int, nargs="*", help="min-time-vs-block: values of n")
    e.add_argument("--trials", type=int, default=10, help="min-time-vs-block: trials per n")
    e.add_argument("--time-limit", type=float, default=60.0, help="min-time-vs-block: seconds per MILP")
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except InfeasibleDesignError as e:
        print(f"infeasible: {e}", file=sys.stderr)
        issues = (getattr(e, "detail", None) or {}).get("all") or []
        for cond, why in issues:
            print(f"violated condition: {cond}: {why}", file=sys.stderr)
        if not issues and getattr(e, "condition", None):
            print(f"violated condition: {e.condition}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DivergenceError as e:
        print(f"diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except SolverFailureError as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except SplitForgeError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
