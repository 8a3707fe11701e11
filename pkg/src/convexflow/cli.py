"""Command-line front end.

::

    convexflow run CONFIG [--out DIR] [--seed N] [--threads K]
    convexflow paper-check [--out DIR] [--seed N] [--threads K]
    convexflow plot CSV SPEC [--out DIR]
    convexflow scenarios

Exit status is 0 when every enabled assertion passes, 1 when one fails,
2 for invalid input and 3 when the solver or a diagnostic raises. Errors
are reported as a single JSON object on standard error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .battery import run_battery, write_battery
from .config import ConfigError, RunConfig, load_config, write_csv
from .diagnostics import (
    Patch,
    c2_monitor,
    dual_concavity_check,
    harnack_check,
    normal_image_disjointness,
    nu_preservation_check,
    velocity_floor_check,
)
from .exact import SCENARIOS, SphereSolution, scenario
from .geometry import fields_table, geometry_fields
from .plot import PlotError, emit_plot
from .solver import ConvexityLost, FlowParams, StepRecord, nested_domain_study, run

EXIT_OK, EXIT_FAILED, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2, 3

SCENARIO_HELP = {
    "paraboloid": "u = |x|^2",
    "scaled_paraboloid": "u = a |x|^2",
    "smoothed_cone": "u = mu log sum exp(+-x_i / mu), a smoothed max |x_i|",
    "hemisphere": "lower cap of the sphere of radius r0 resting on the origin",
}


@dataclass
class DiagnosticOutput:
    name: str
    header: tuple[str, ...]
    rows: list
    passed: bool | None
    detail: str
    plot: str | None = None


# -- run -------------------------------------------------------------------------


def flow_params(cfg: RunConfig) -> FlowParams:
    barrier = None
    if cfg.boundary == "barrier":
        barrier = SphereSolution.resting_on_origin(cfg.r0, cfg.rho, cfg.n, cfg.c_H)
    return FlowParams(
        rho=cfg.rho, n=cfg.n, L=cfg.L, dx=cfg.dx, t_end=cfg.t_end, cfl=cfg.cfl, dt=cfg.dt,
        boundary=cfg.boundary, barrier=barrier, convexity_floor=cfg.convexity_floor,
    )


def snapshot_schedule(cfg: RunConfig) -> list[float]:
    """Requested times plus those the enabled diagnostics need."""
    times = set(cfg.snapshot_times)
    if "harnack" in cfg.diagnostics:
        times |= {cfg.harnack_t1, cfg.harnack_t2}
    if "velocity_floor" in cfg.diagnostics:
        times |= set(np.linspace(cfg.floor_t / 2, cfg.floor_t, 5).tolist())
    return sorted(t for t in times if 0 < t <= cfg.t_end)


def _diag_steps(cfg, traj, params):
    rows = [r.as_row() for r in traj.records]
    detail = f"{len(rows)} steps, min H {min((r.min_H for r in traj.records), default=float('nan')):.6g}"
    return DiagnosticOutput("steps", StepRecord.FIELDS, rows, None, detail, "x=t;y=min_H,max_H;title=mean curvature range")


def _diag_fields(cfg, traj, params):
    last = traj.snapshots[-1]
    header, rows = fields_table(geometry_fields(last, cfg.rho, cfg.convexity_floor), last.grid)
    # a profile plot only makes sense in one dimension
    plot = f"x=x1;y=H;title=mean curvature at t={last.t:.6g}" if cfg.n == 1 else None
    return DiagnosticOutput("fields", tuple(header), rows, None, f"{len(rows)} nodes at t={last.t:.6g}", plot)


def _diag_nu(cfg, traj, params):
    rep = nu_preservation_check(traj, cfg.nu_radii, cfg.nu_stride, cfg.nu_pair_distance)
    labels = [f"{t:.6g}" for t in rep.times]
    header = ("r",) + tuple(f"eps@t={s}" for s in labels) + tuple(f"pairs@t={s}" for s in labels)
    rows = []
    for k, r in enumerate(rep.profiles[0].radii):
        rows.append((r, *(p.eps_of_r[k] for p in rep.profiles), *(p.pair_count[k] for p in rep.profiles)))
    first = rep.profiles[0]
    verdicts = {
        "none": None,
        "decay": first.decays(0.2),
        "plateau": bool(np.all(first.eps_of_r[~first.empty] >= 0.5)),
        "preserve": rep.passed,
    }
    passed = verdicts[cfg.nu_expect]
    detail = f"eps(r, t=0) = {', '.join(f'{e:.4g}' for e in first.eps_of_r)}; expectation {cfg.nu_expect}"
    spec = "x=r;y=" + ",".join(h for h in header if h.startswith("eps@")) + ";title=normal oscillation outside B_r"
    return DiagnosticOutput("nu_profile", header, rows, passed, detail, spec)


def _diag_harnack(cfg, traj, params):
    rec = harnack_check(traj, cfg.harnack_p, cfg.harnack_t1, cfg.harnack_t2)
    header = ("t1", "t2", "F1", "F2", "ratio", "bound", "threshold", "passed")
    rows = [(rec.t1, rec.t2, rec.F1, rec.F2, rec.ratio, rec.bound, rec.threshold, rec.passed)]
    return DiagnosticOutput("harnack", header, rows, rec.passed, f"ratio {rec.ratio:.6g} vs threshold {rec.threshold:.6g}")


def _diag_c2(cfg, traj, params):
    mon = c2_monitor(traj, cfg.c2_beta, Patch(tuple(cfg.c2_seed), cfg.c2_height, cfg.c2_G))
    header = ("t", "localized", "time_weighted", "patch_nodes")
    rows = list(zip(mon.times, mon.localized, mon.time_weighted, mon.patch_sizes))
    detail = f"max {np.nanmax(mon.time_weighted):.6g} vs first-quarter max {mon.quarter_max:.6g}"
    return DiagnosticOutput("c2_monitor", header, rows, not mon.exceeded, detail, "x=t;y=time_weighted,localized;title=localized curvature quantity")


def _diag_floor(cfg, traj, params):
    rep = velocity_floor_check(traj, cfg.floor_x, cfg.floor_t)
    rows = list(zip(rep.times, rep.curvatures))
    return DiagnosticOutput("velocity_floor", ("t", "H"), rows, rep.passed, f"floor {rep.floor:.6g}", "x=t;y=H;title=mean curvature at a fixed normal")


def _diag_disjoint(cfg, traj, params):
    T = cfg.disjoint_T if cfg.disjoint_T > 0 else cfg.t_end
    rep = normal_image_disjointness(traj, cfg.disjoint_r, cfg.disjoint_R, T)
    rows = [(t, s, rep.margin) for t, s in zip(rep.times, rep.separations)]
    detail = f"smallest separation {rep.separations.min():.6g}, margin {rep.margin:.6g}"
    return DiagnosticOutput("disjointness", ("t", "separation", "margin"), rows, rep.passed, detail, "x=t;y=separation,margin;title=gradient image separation")


def _diag_dual(cfg, traj, params):
    rng = np.random.default_rng(cfg.seed)
    header = ("rho", "samples", "worst_eig_ratio", "worst_minor_error", "worst_fd_error", "passed")
    rows, ok = [], True
    for rho in cfg.dual_rho:
        lam = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), size=(cfg.dual_samples, 2)))
        rep = dual_concavity_check(rho, lam)
        ok &= rep.passed
        rows.append((rho, rep.samples, rep.worst_eig_ratio, rep.worst_minor_error, rep.worst_fd_error, rep.passed))
    return DiagnosticOutput("dual_concavity", header, rows, bool(ok), f"{len(rows)} exponents, seed {cfg.seed}")


def _diag_nested(cfg, traj, params):
    rep = nested_domain_study(cfg.scenario, params.replace(L=cfg.nested_L[0]), cfg.nested_L, **cfg.scenario_params)
    rows = list(zip(rep.domains, rep.domains[1:], rep.differences))
    passed = None if rep.degenerate else rep.decreasing
    detail = "degenerate" if rep.degenerate else f"differences {', '.join(f'{d:.4g}' for d in rep.differences)}"
    return DiagnosticOutput("nested_domains", ("L_small", "L_large", "difference"), rows, passed, detail, "x=L_large;y=difference;title=nested domain differences")


DIAGNOSTIC_RUNNERS = {
    "steps": _diag_steps,
    "fields": _diag_fields,
    "nu_profile": _diag_nu,
    "harnack": _diag_harnack,
    "c2_monitor": _diag_c2,
    "velocity_floor": _diag_floor,
    "disjointness": _diag_disjoint,
    "dual_concavity": _diag_dual,
    "nested_domains": _diag_nested,
}


def _trajectory_rows(traj):
    n = traj.grid.n
    for snap in traj.snapshots:
        x = snap.grid.coords.reshape(-1, n)
        u = np.asarray(snap.values).reshape(-1)
        for k in range(len(u)):
            yield (snap.t, *x[k], u[k])


def run_command(cfg: RunConfig, out: Path, threads: int = 1, log=print) -> int:
    """Run the flow and enabled diagnostics, write artifacts, return the exit status."""
    out.mkdir(parents=True, exist_ok=True)
    params = flow_params(cfg)
    u0 = scenario(cfg.scenario, params.grid, **cfg.scenario_params)
    every = cfg.snapshot_every or None
    traj = run(u0, params, snapshot_times=snapshot_schedule(cfg), snapshot_every=every)
    coords = ("x",) if cfg.n == 1 else ("x1", "x2")
    write_csv(out / "trajectory.csv", ("t", *coords, "u"), _trajectory_rows(traj))
    log(f"run: {len(traj.records)} steps to t={traj.times[-1]:.6g}, {len(traj.snapshots)} snapshots")

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        futures = [pool.submit(DIAGNOSTIC_RUNNERS[d], cfg, traj, params) for d in cfg.diagnostics]
        outputs = [f.result() for f in futures]

    summary = []
    for res in outputs:
        path = write_csv(out / f"{res.name}.csv", res.header, res.rows)
        if cfg.plots and res.plot and len(res.rows):
            emit_plot(path, res.plot, out / f"{res.name}.svg")
        status = "n/a" if res.passed is None else ("pass" if res.passed else "FAIL")
        log(f"{res.name}: {status} ({res.detail})")
        summary.append((res.name, status, res.detail))
    if summary:
        write_csv(out / "summary.csv", ("diagnostic", "status", "detail"), summary)
    failed = [s[0] for s in summary if s[1] == "FAIL"]
    return EXIT_FAILED if failed else EXIT_OK


# -- entry point -----------------------------------------------------------------


def _error(kind: str, message: str, code: int, **extra) -> int:
    payload = {"error": kind, "message": message, **extra}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="convexflow", description="Convex graphs moving by powers of the mean curvature.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed", type=int, help="random seed (dual-concavity sampling)")
    common.add_argument("--threads", type=int, default=1, help="diagnostics evaluated concurrently")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", parents=[common], help="run one configured flow and its diagnostics")
    p_run.add_argument("config", type=Path)
    sub.add_parser("paper-check", parents=[common], help="run the full verification battery")
    p_plot = sub.add_parser("plot", help="draw CSV columns as a deterministic SVG")
    p_plot.add_argument("csv", type=Path)
    p_plot.add_argument("spec", help="x=COL;y=COL[,COL...][;title=TEXT][;logy=true]")
    p_plot.add_argument("--out", type=Path, help="output directory (default: next to the CSV)")
    sub.add_parser("scenarios", help="list initial data")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) is not None and getattr(args, "threads", 1) < 1:
        return _error("UsageError", "--threads must be >= 1", EXIT_INPUT)
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        return _error("UsageError", "--seed must be in [0, 2^64)", EXIT_INPUT)
    try:
        if args.command == "scenarios":
            for name in sorted(SCENARIOS):
                params = ", ".join(SCENARIOS[name][1]) or "-"
                print(f"{name:18s} params: {params:6s} {SCENARIO_HELP[name]}")
            return EXIT_OK
        if args.command == "plot":
            out_dir = args.out or args.csv.parent
            out_dir.mkdir(parents=True, exist_ok=True)
            path = emit_plot(args.csv, args.spec, out_dir / (args.csv.stem + ".svg"))
            print(path)
            return EXIT_OK
        if args.command == "run":
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg = cfg.replace(seed=args.seed)
            out = args.out or Path(cfg.out)
            return run_command(cfg, out, args.threads)
        if args.command == "paper-check":
            out = args.out or Path("paper_check")
            start = time.perf_counter()
            results = run_battery(seed=args.seed or 0, progress=lambda r: print(r.line, flush=True))
            write_battery(results, out)
            elapsed = time.perf_counter() - start
            ok = all(r.passed for r in results)
            print(f"paper-check: {sum(r.passed for r in results)}/{len(results)} passed in {elapsed:.1f} s")
            return EXIT_OK if ok else EXIT_FAILED
    except ConfigError as exc:
        return _error("ConfigError", str(exc), EXIT_INPUT, errors=[[ln, msg] for ln, msg in exc.errors])
    except PlotError as exc:
        return _error("PlotError", str(exc), EXIT_INPUT)
    except FileNotFoundError as exc:
        return _error("FileNotFoundError", str(exc), EXIT_INPUT)
    except ConvexityLost as exc:
        return _error("ConvexityLost", str(exc), EXIT_RUNTIME, t=exc.t, node=list(exc.node))
    except (ValueError, RuntimeError, KeyError) as exc:
        return _error(type(exc).__name__, str(exc), EXIT_RUNTIME)
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
