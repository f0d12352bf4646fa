"""Command line interface: solve runs, parameter sweeps, benchmarks, checks.

Exit codes: 0 success/converged, 1 usage or configuration error, 2 solver
hit its iteration cap, 3 stencil verification mismatch.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import io as hio
from .errors import HelmdefError
from .krylov import StopRule
from .madp import MadpSolver
from .operators import (
    arithmetic_intensity,
    assemble_csr,
    helmholtz_operator,
    matvec_flop_byte_counters,
)
from .grid import mp1_problem
from .stencils import verify_chain

__all__ = ["main"]


def _build_parser():
    p = argparse.ArgumentParser(prog="helmdef", description=__doc__)
    sub = p.add_subparsers(dest="command")

    ps = sub.add_parser("solve", help="run one configured solve")
    _common_flags(ps)
    ps.add_argument("--write-solution", action="store_true", help="also write the field CSV")

    pw = sub.add_parser("sweep", help="parameter sweeps over one configuration")
    pw.add_argument("kind", choices=["coarsest_tol", "cslp_tol", "level_tol", "complexity"])
    _common_flags(pw)
    pw.add_argument("--values", help="comma separated parameter values")
    pw.add_argument("--range", dest="range_spec", help="a:b:step geometric range")
    pw.add_argument("--level", type=int, default=2, help="level for level_tol sweeps")
    pw.add_argument("--steps", type=int, default=3, help="doublings for complexity sweeps")

    pb = sub.add_parser("bench", help="matrix-free vs CSR matvec benchmark")
    pb.add_argument("--sizes", default="33,65,129,257", help="comma separated n (grid n x n)")
    pb.add_argument("--reps", type=int, default=100, help="matvecs per timing sample")
    pb.add_argument("--wavenumber", type=float, default=40.0)
    pb.add_argument("--out", default=None, help="output CSV path")

    pv = sub.add_parser("stencils", help="coarse-kernel chain inspection")
    pv.add_argument("--verify", action="store_true", help="check the chain against the reference tables")
    return p


def _common_flags(sp):
    sp.add_argument("--config", help="path to a key = value config file")
    sp.add_argument("--preset", help="override the preset name")
    sp.add_argument("--levels", type=int, help="override the level count")
    sp.add_argument("--workers", type=int, help="override the worker count")
    sp.add_argument("--out", default=None, help="output directory override")
    sp.add_argument("--kh", type=float, help="override the resolution target")
    sp.add_argument("--freq-hz", type=float, help="override the frequency")
    sp.add_argument("--wavenumber", type=float, help="override the wavenumber")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "bench":
            return _cmd_bench(args)
        if args.command == "stencils":
            return _cmd_stencils(args)
    except HelmdefError as exc:
        print(f"helmdef: error: {exc}", file=sys.stderr)
        return 1
    return 1


def _load_config(args) -> hio.RunConfig:
    if not args.config:
        raise HelmdefError("a --config file is required")
    cfg = hio.parse_config_file(args.config)
    if args.preset:
        cfg = replace(cfg, preset=args.preset)
    if args.levels:
        cfg = replace(cfg, levels=args.levels)
    if args.kh is not None:
        cfg = replace(cfg, kh=args.kh, nx=None)
    if args.freq_hz is not None:
        cfg = replace(cfg, freq_hz=args.freq_hz, wavenumber=None)
    if args.wavenumber is not None:
        cfg = replace(cfg, wavenumber=args.wavenumber, freq_hz=None)
    workers = args.workers
    if workers is None:
        workers = int(os.environ.get("HELMDEF_WORKERS", cfg.workers))
    cfg = replace(cfg, workers=workers)
    if args.out:
        cfg = replace(cfg, out_dir=args.out)
    return cfg


def _cmd_solve(args) -> int:
    cfg = _load_config(args)
    problem = hio.build_problem(cfg)
    solver_cfg = hio.build_solver_config(cfg, problem.hierarchy)
    with MadpSolver(problem.hierarchy, solver_cfg, workers=cfg.workers) as solver:
        u, report = solver.solve(problem.rhs)
    out_dir = cfg.out_dir
    report_path = os.path.join(out_dir, f"{problem.name}_report.csv")
    hio.write_report(report, report_path)
    if cfg.write_solution or getattr(args, "write_solution", False):
        hio.write_field(u, problem.hierarchy, os.path.join(out_dir, f"{problem.name}_field.csv"))
    status = "converged" if report.converged else "cap reached"
    print(
        f"{problem.name}: {report.outer_iterations} outer iterations, "
        f"relres {report.final_relres:.3e}, {report.wall_ms:.1f} ms ({status}); "
        f"report: {report_path}"
    )
    return 0 if report.converged else 2


def _sweep_values(args, default):
    if args.values:
        return [float(v) for v in args.values.split(",")]
    if args.range_spec:
        try:
            a, b, step = (float(v) for v in args.range_spec.split(":"))
        except ValueError:
            raise HelmdefError(f"bad --range {args.range_spec!r}, expected a:b:step") from None
        if step <= 0 or step == 1.0 or a <= 0 or b <= 0:
            raise HelmdefError("geometric --range needs positive a, b and step != 1")
        vals = []
        v = a
        cmp = (lambda x: x >= b * (1 - 1e-12)) if step < 1 else (lambda x: x <= b * (1 + 1e-12))
        while cmp(v):
            vals.append(v)
            v *= step
        return vals
    return list(default)


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    rows = []
    if args.kind == "complexity":
        exponent, rows = _complexity_sweep(cfg, args.steps)
        header = "freq_hz,n_unknowns,outer_iters,converged,l2_cycle_iters_max,wall_ms"
        footer = [f"# fitted_exponent = {exponent:.4f}"]
        print(f"fitted time exponent vs N: {exponent:.3f}")
    else:
        defaults = {
            "coarsest_tol": (1.0, 1e-1, 1e-2, 1e-4, 1e-6, 1e-8),
            "cslp_tol": (1e-1, 1e-2, 1e-4, 1e-6, 1e-8),
            "level_tol": (1.0, 0.5, 0.3, 0.1, 0.01),
        }
        values = _sweep_values(args, defaults[args.kind])
        problem = hio.build_problem(cfg)
        for val in values:
            run_cfg = _apply_sweep_value(cfg, args, val)
            solver_cfg = hio.build_solver_config(run_cfg, problem.hierarchy)
            with MadpSolver(problem.hierarchy, solver_cfg, workers=cfg.workers) as solver:
                _, rep = solver.solve(problem.rhs)
            ml = problem.hierarchy.ml
            rows.append(
                f"{val:g},{rep.outer_iterations},{'true' if rep.converged else 'false'},"
                f"{rep.cycle_max(ml)},{rep.cycle_max(2) if ml > 2 else 0},{rep.wall_ms:.17g}"
            )
            print(
                f"{args.kind} = {val:g}: outer {rep.outer_iterations} "
                f"(coarsest {rep.cycle_max(ml)}, L2 {rep.cycle_max(2) if ml > 2 else 0})"
            )
        header = "param,outer_iters,converged,coarsest_iters_max,l2_cycle_iters_max,wall_ms"
        footer = []
    out = args.out or cfg.out_dir
    path = os.path.join(out, f"sweep_{args.kind}.csv")
    hio._write_text(path, "\n".join([header] + rows + footer) + "\n")
    print(f"sweep CSV: {path}")
    return 0


def _apply_sweep_value(cfg, args, val):
    if args.kind == "coarsest_tol":
        return replace(cfg, coarsest_tol=val, coarsest_maxiter=100)
    if args.kind == "cslp_tol":
        return replace(cfg, cslp_tol=val)
    overrides = dict(cfg.level_overrides)
    overrides[(args.level, "cycle_tol")] = val
    return replace(cfg, level_overrides=overrides)


def _complexity_sweep(cfg, steps):
    rows = []
    ns, ts = [], []
    base_f = cfg.freq_hz
    if base_f is None:
        raise HelmdefError("complexity sweeps need freq_hz")
    if cfg.kh is None:
        raise HelmdefError("complexity sweeps keep kh fixed; set kh in the config")
    for step in range(steps):
        f = base_f * 2**step
        run_cfg = replace(cfg, freq_hz=f)
        problem = hio.build_problem(run_cfg)
        solver_cfg = hio.build_solver_config(run_cfg, problem.hierarchy)
        with MadpSolver(problem.hierarchy, solver_cfg, workers=cfg.workers) as solver:
            _, rep = solver.solve(problem.rhs)
        n = problem.hierarchy.level(1).npoints
        ns.append(n)
        ts.append(rep.wall_ms)
        rows.append(
            f"{f:g},{n},{rep.outer_iterations},{'true' if rep.converged else 'false'},"
            f"{rep.cycle_max(2)},{rep.wall_ms:.17g}"
        )
        print(f"f = {f:g} Hz, N = {n}: outer {rep.outer_iterations}, {rep.wall_ms:.0f} ms")
    exponent = float(np.polyfit(np.log(ns), np.log(ts), 1)[0])
    return exponent, rows


def _cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    lines = [
        "n,n_points,mf_gflops,csr_gflops,ratio,mf_intensity,csr_intensity,max_rel_diff"
    ]
    i_mf = arithmetic_intensity("matrix_free")
    i_csr = arithmetic_intensity("csr")
    for n in sizes:
        prob = mp1_problem(k=args.wavenumber, n=n, ml=2)
        op = helmholtz_operator(prob.hierarchy, 1)
        try:
            mat = assemble_csr(op)
        except HelmdefError as exc:
            print(f"n = {n}: skipped ({exc})")
            continue
        rng = np.random.default_rng(1234)
        u = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        v_mf = op.apply(u)
        v_csr = (mat @ u.ravel()).reshape(n, n)
        denom = np.abs(v_csr).max()
        rel = float(np.abs(v_mf - v_csr).max() / denom) if denom else 0.0
        if rel > 1e-13:
            raise HelmdefError(f"matrix-free and CSR paths disagree at n={n}: {rel:.2e}")
        t_mf = _time_matvec(lambda: op.apply(u), args.reps)
        flat = u.ravel()
        t_csr = _time_matvec(lambda: mat @ flat, args.reps)
        flops_mf, _ = matvec_flop_byte_counters("matrix_free", n * n)
        flops_csr, _ = matvec_flop_byte_counters("csr", n * n)
        g_mf = flops_mf / t_mf / 1e9
        g_csr = flops_csr / t_csr / 1e9
        lines.append(
            f"{n},{n * n},{g_mf:.4f},{g_csr:.4f},{g_mf / g_csr:.3f},"
            f"{i_mf:.6f},{i_csr:.6f},{rel:.3e}"
        )
        print(
            f"n = {n:5d}: matrix-free {g_mf:6.3f} GFLOP/s, CSR {g_csr:6.3f} GFLOP/s, "
            f"ratio {g_mf / g_csr:4.2f}"
        )
    if args.out:
        hio._write_text(args.out, "\n".join(lines) + "\n")
        print(f"bench CSV: {args.out}")
    return 0


def _time_matvec(fn, reps):
    fn()  # warm up (jit compilation, caches)
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) / reps


def _cmd_stencils(args) -> int:
    results = verify_chain()
    if not args.verify:
        for rec in results:
            print(f"L{rec['level']} {rec['kind']}: derived")
        return 0
    ok = True
    for rec in results:
        level, kind = rec["level"], rec["kind"]
        if rec["within_ulp"]:
            tag = "exact" if rec["exact_match"] else "exact (reference rounded above 2^53)"
            print(f"L{level} {kind}: {tag}")
        else:
            ok = False
            r, c, got, want = rec["first_mismatch"]
            print(
                f"L{level} {kind}: MISMATCH at row {r} col {c}: derived {got}, reference {want}"
            )
    if ok:
        print("chain L2->L3->L4->L5->L6 verified against the reference tables")
        return 0
    return 3


if __name__ == "__main__":
    raise SystemExit(main())
