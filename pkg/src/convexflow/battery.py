"""The paper-check battery: ten numbered checks with fixed parameters.

Each check returns a :class:`CheckResult` carrying a pass flag, a one-line
summary and a table for CSV output. Tables and summaries contain no timing
information, so files written from them are byte-reproducible; wall-clock
times are kept on the result object only.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .config import write_csv
from .diagnostics import (
    Patch,
    c2_closed_form,
    c2_monitor,
    dual_concavity_check,
    dual_matrix,
    evolution_identity_check,
    harnack_check,
    harnack_sphere,
    nu_preservation_check,
    nu_profile,
    principal_minor_formula,
)
from .exact import SphereSolution, scenario, solve_barrier, sphere_cap_graph
from .geometry import geometry_fields
from .solver import FlowParams, comparison_run, nested_domain_study, run, scaling_study

__all__ = ["CheckResult", "CHECKS", "run_battery", "write_battery"]

RESOLUTIONS = (1 / 50, 1 / 100, 1 / 200)
ORDER_MIN = 1.8


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    header: tuple[str, ...]
    rows: list[tuple]
    seconds: float = field(default=0.0, compare=False)

    @property
    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name}: {self.detail}"


def _g(x) -> str:
    return format(float(x), ".3g")


def _orders(errors) -> np.ndarray:
    e = np.asarray(errors, dtype=float)
    return np.log2(e[:-1] / e[1:])


def _t_end_for_radius(r0, r_end, rho, c_H):
    return (r0 ** (rho + 1) - r_end ** (rho + 1)) / ((rho + 1) * c_H**rho)


# -- 1 ---------------------------------------------------------------------------


def sphere_convergence(seed: int = 0) -> CheckResult:
    """Hemisphere caps against the exact radius law at three resolutions."""
    header = ("n", "rho", "dx", "t_end", "max_error", "order", "richardson_order", "seconds_ok")
    rows, ok = [], True
    worst_err, worst_order = 0.0, np.inf
    for n in (1, 2):
        for rho in (0.5, 1.0, 2.0):
            s = SphereSolution.resting_on_origin(2.0, rho, n)
            t_end = _t_end_for_radius(2.0, 1.9, rho, s.c_H)
            errs, finals, secs = [], [], []
            for dx in RESOLUTIONS:
                p = FlowParams(rho=rho, n=n, L=0.5, dx=dx, t_end=t_end, boundary="barrier", barrier=s)
                start = time.perf_counter()
                traj = run(sphere_cap_graph(s, 0.0, p.grid), p, snapshot_times=[t_end / 2], keep_records=False)
                secs.append(time.perf_counter() - start)
                errs.append(max(
                    float(np.max(np.abs(snap.values - sphere_cap_graph(s, snap.t, p.grid).values)))
                    for snap in traj.snapshots
                ))
                finals.append(np.asarray(traj.snapshots[-1].values))
            orders = _orders(errs)
            # Richardson: differences of successive solutions on the coarse nodes
            sub = (slice(None, None, 2),) * n
            sub4 = (slice(None, None, 4),) * n
            d1 = np.max(np.abs(finals[0] - finals[1][sub]))
            d2 = np.max(np.abs(finals[1][sub] - finals[2][sub4]))
            rich = float(np.log2(d1 / d2))
            fast = max(secs) <= 60.0
            case_ok = errs[-1] <= 1e-3 and orders.min() >= ORDER_MIN and rich >= ORDER_MIN and fast
            ok &= case_ok
            worst_err = max(worst_err, errs[-1])
            worst_order = min(worst_order, orders.min(), rich)
            for k, dx in enumerate(RESOLUTIONS):
                rows.append((n, rho, dx, t_end, errs[k], orders[k - 1] if k else np.nan, rich if k == 2 else np.nan, secs[k] <= 60.0))
    detail = f"worst error at dx=1/200 {_g(worst_err)} (limit 1e-3), smallest order {worst_order:.3f} (limit {ORDER_MIN})"
    return CheckResult(1, "sphere oracle convergence", bool(ok), detail, header, rows)


# -- 2 ---------------------------------------------------------------------------


def comparison_principle(seed: int = 0) -> CheckResult:
    """Paraboloid under an exact barrier cap, and ordered numerical pairs."""
    header = ("case", "rho", "dx", "max_violation", "bound", "passed")
    rows, ok = [], True
    for rho in (0.5, 1.0, 2.0):
        bar = solve_barrier(1.0, 2.0, 0.1, rho, 1)
        p = FlowParams(rho=rho, n=1, L=0.5, dx=0.01, t_end=bar.T)
        rep = comparison_run(scenario("paraboloid", p.grid), bar.sphere, p)
        below = rep.max_violation <= 0.0
        ok &= below
        rows.append((f"barrier h={bar.h:.6g}", rho, p.dx, rep.max_violation, 0.0, below))
    pairs = {
        "shifted": lambda g: scenario("paraboloid", g).values + 0.1,
        "touching": lambda g: scenario("scaled_paraboloid", g, a=1.1).values,
    }
    for name, upper in pairs.items():
        viol = []
        for dx in (0.02, 0.01):
            p = FlowParams(rho=1.0, n=1, L=2.0, dx=dx, t_end=0.05)
            low = scenario("paraboloid", p.grid)
            rep = comparison_run(low, low.with_values(upper(p.grid)), p)
            viol.append(rep.max_violation)
            ok &= rep.passed
            rows.append((name, 1.0, dx, rep.max_violation, rep.bound, rep.passed))
        # exact ordering makes the halving test vacuous; otherwise demand it
        if max(viol) <= 1e-13:
            halving = True
        else:
            halving = viol[0] > 0 and 0.4 <= viol[1] / viol[0] <= 0.6
        ok &= halving
        rows.append((f"{name} halving", 1.0, np.nan, viol[1] / viol[0] if viol[0] else 0.0, 0.5, halving))
    worst = max(r[3] for r in rows if not str(r[0]).endswith("halving"))
    detail = f"barrier never crossed, largest ordering violation {_g(worst)}"
    return CheckResult(2, "barrier and comparison principle", bool(ok), detail, header, rows)


# -- 3 ---------------------------------------------------------------------------


def nu_condition(seed: int = 0) -> CheckResult:
    """Normal oscillation decays for the paraboloid, persists for the cone."""
    header = ("case", "t", "r", "eps_of_r", "pair_count")
    rows = []
    p = FlowParams(rho=1.0, n=1, L=4.0, dx=0.01, t_end=0.05)
    u0 = scenario("paraboloid", p.grid)
    radii = (2.0, 5.0, 10.0)
    prof = nu_profile(u0, radii)
    decays = bool(np.all(np.diff(prof.eps_of_r) < 0) and prof.eps_of_r[1] < 0.2)
    traj = run(u0, p, snapshot_times=[0.01, 0.02, 0.03, 0.04], keep_records=False)
    pres = nu_preservation_check(traj, radii)
    for t, pr in zip(pres.times, pres.profiles):
        rows.extend(("paraboloid", t, r, e, c) for r, e, c in zip(pr.radii, pr.eps_of_r, pr.pair_count))
    cone = scenario("smoothed_cone", FlowParams(rho=1.0, n=2, L=4.0, dx=0.05, t_end=0.0).grid, mu=0.05)
    cprof = nu_profile(cone, (1.0, 2.0, 3.0, 4.0, 5.0))
    rows.extend(("smoothed_cone", 0.0, r, e, c) for r, e, c in zip(cprof.radii, cprof.eps_of_r, cprof.pair_count))
    plateau = bool(np.all(cprof.eps_of_r >= 0.5))
    ok = decays and pres.passed and plateau
    detail = (
        f"paraboloid eps(r)={', '.join(_g(e) for e in prof.eps_of_r)}, max growth "
        f"{_g(np.nanmax(pres.excess))} (slack {_g(pres.slack)}); cone min eps {_g(cprof.eps_of_r.min())}"
    )
    return CheckResult(3, "nu-condition", ok, detail, header, rows)


# -- 4 ---------------------------------------------------------------------------


def dual_concavity(seed: int = 0) -> CheckResult:
    """Positive semidefinite dual matrix, minor formula, finite differences."""
    header = ("rho", "samples", "worst_eig_ratio", "worst_minor_error", "worst_fd_error", "printed_minor_error", "passed")
    rows, ok = [], True
    rng = np.random.default_rng(seed)
    for rho in (0.5, 1.0, 2.0, 5.0):
        lam = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), size=(1000, 2)))
        rep = dual_concavity_check(rho, lam)
        ok &= rep.passed
        rows.append((rho, rep.samples, rep.worst_eig_ratio, rep.worst_minor_error, rep.worst_fd_error, rep.printed_minor_error, rep.passed))
    # the hand-evaluated case: rho = 1, lambda = (1, 1)
    M = dual_matrix([1.0, 1.0], 1.0)
    fixed = np.allclose(M, [[1.0, -1.0], [-1.0, 1.0]], atol=1e-15, rtol=0) and principal_minor_formula([1.0, 1.0], 1.0, 2) == 0.0
    ok &= bool(fixed)
    detail = (
        f"min eig/norm {_g(min(r[2] for r in rows))}, minor error {_g(max(r[3] for r in rows))}, "
        f"fd error {_g(max(r[4] for r in rows))}; printed minor formula off by {_g(max(r[5] for r in rows))}"
    )
    return CheckResult(4, "dual concavity", bool(ok), detail, header, rows)


# -- 5 ---------------------------------------------------------------------------


def harnack(seed: int = 0) -> CheckResult:
    """Harnack ratio on exact spheres and on paraboloid runs."""
    header = ("case", "rho", "n", "t1", "t2", "ratio", "bound", "threshold", "passed")
    rows, ok = [], True
    for n in (1, 2):
        for rho in (0.5, 1.0, 2.0):
            s = SphereSolution.resting_on_origin(2.0, rho, n)
            times = np.linspace(0.05, 0.95, 10) * s.extinction_time
            for t1 in times:
                for t2 in times[times >= t1]:
                    rec = harnack_sphere(s, t1, t2)
                    ok &= rec.passed
                    rows.append(("sphere", rho, n, t1, t2, rec.ratio, rec.bound, rec.threshold, rec.passed))
    for rho in (0.5, 1.0, 2.0):
        p = FlowParams(rho=rho, n=1, L=2.0, dx=0.01, t_end=0.04)
        traj = run(scenario("paraboloid", p.grid), p, snapshot_times=[0.01], keep_records=False)
        rec = harnack_check(traj, (0.0, -1.0), 0.01, 0.04)
        ok &= rec.passed
        rows.append(("paraboloid", rho, 1, 0.01, 0.04, rec.ratio, rec.bound, rec.threshold, rec.passed))
    para = [r for r in rows if r[0] == "paraboloid"]
    detail = (
        f"{len(rows) - len(para)} sphere pairs; paraboloid ratio/bound "
        + ", ".join(f"{r[5]:.3f}/{r[6]:.3f}" for r in para)
    )
    return CheckResult(5, "Harnack inequality", bool(ok), detail, header, rows)


# -- 6 ---------------------------------------------------------------------------


def evolution_identities(seed: int = 0) -> CheckResult:
    """F, v and X identities on 50 random spheres."""
    header = ("rho", "n", "r0", "t", "polar", "residual_F", "residual_v", "residual_X")
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(50):
        rho = float(rng.uniform(0.25, 5.0))
        n = int(rng.integers(1, 3))
        r0 = float(rng.uniform(0.5, 5.0))
        s = SphereSolution.resting_on_origin(r0, rho, n)
        t = float(rng.uniform(0.05, 0.95)) * s.extinction_time
        polar = float(rng.uniform(0.0, 1.2))
        res = [evolution_identity_check(s, t, k, polar=polar) for k in "FvX"]
        rows.append((rho, n, r0, t, polar, *res))
    worst = np.max(np.array([r[5:] for r in rows]), axis=0)
    ok = bool(worst[0] < 1e-8 and worst[1] < 1e-8)
    detail = f"worst residual F {_g(worst[0])}, v {_g(worst[1])} (limit 1e-8), X {_g(worst[2])}"
    return CheckResult(6, "evolution identities", ok, detail, header, rows)


# -- 7 ---------------------------------------------------------------------------


def c2_bound(seed: int = 0) -> CheckResult:
    """Localized curvature quantity on exact caps and paraboloid runs."""
    header = ("case", "rho", "dx", "error_or_peak_ratio", "order", "passed")
    rows, ok = [], True
    beta, G = 2.0, 0.5
    for rho in (0.5, 1.0, 2.0):
        s = SphereSolution.resting_on_origin(2.0, rho, 1)
        t_end = _t_end_for_radius(2.0, 1.97, rho, s.c_H)
        ts = list(np.linspace(0.0, t_end, 11)[1:])
        patch = Patch((0.1,), 0.04, G)
        errs = []
        for dx in RESOLUTIONS:
            p = FlowParams(rho=rho, n=1, L=0.5, dx=dx, t_end=t_end, boundary="barrier", barrier=s)
            traj = run(sphere_cap_graph(s, 0.0, p.grid), p, snapshot_times=ts, keep_records=False)
            mon = c2_monitor(traj, beta, patch)
            _, exact_tw = c2_closed_form(s, traj.times, p.grid, beta, patch)
            errs.append(float(np.nanmax(np.abs(mon.time_weighted - exact_tw))))
        orders = _orders(errs)
        case_ok = bool(orders.min() >= ORDER_MIN)
        ok &= case_ok
        for k, dx in enumerate(RESOLUTIONS):
            rows.append(("cap", rho, dx, errs[k], orders[k - 1] if k else np.nan, case_ok))
    for rho in (0.5, 1.0, 2.0):
        p = FlowParams(rho=rho, n=1, L=2.0, dx=0.01, t_end=0.05)
        u0 = scenario("paraboloid", p.grid)
        seed_x = (1.0,)
        F_seed = geometry_fields(u0, rho).F[p.grid.index_of(seed_x)]
        # the patch is crossed by the surface within the window
        patch = Patch(seed_x, float(F_seed * p.t_end), G)
        traj = run(u0, p, snapshot_times=list(np.linspace(0.0, p.t_end, 41)[1:]), keep_records=False)
        mon = c2_monitor(traj, beta, patch)
        peak = float(np.nanmax(mon.time_weighted) / mon.quarter_max)
        ok &= not mon.exceeded
        rows.append(("paraboloid", rho, p.dx, peak, np.nan, not mon.exceeded))
    cap_orders = [r[4] for r in rows if r[0] == "cap" and np.isfinite(r[4])]
    peaks = [r[3] for r in rows if r[0] == "paraboloid"]
    detail = f"cap order >= {min(cap_orders):.3f}; paraboloid peak/quarter-max " + ", ".join(f"{x:.3f}" for x in peaks) + " (limit 3)"
    return CheckResult(7, "localized C2 monitor", bool(ok), detail, header, rows)


# -- 8 ---------------------------------------------------------------------------


def nested_domains(seed: int = 0) -> CheckResult:
    """Truncation differences shrink as the domain grows."""
    header = ("case", "L_small", "L_large", "difference", "bound")
    rows = []
    p = FlowParams(rho=1.0, n=1, L=2.0, dx=0.02, t_end=1.0)
    para = nested_domain_study("paraboloid", p, (2.0, 3.0, 4.0))
    rows.extend(("paraboloid", a, b, d, np.nan) for a, b, d in zip(para.domains, para.domains[1:], para.differences))
    s = SphereSolution.resting_on_origin(2.0, 1.0, 1)
    q = FlowParams(rho=1.0, n=1, L=0.4, dx=0.01, t_end=0.1)
    cap = nested_domain_study(
        "hemisphere", q, (0.4, 0.8, 1.2), reference=lambda t, g: sphere_cap_graph(s, t, g).values, r0=2.0
    )
    errs = cap.reference_errors
    bounds = errs[:-1] + errs[1:]
    rows.extend(("hemisphere", a, b, d, e) for a, b, d, e in zip(cap.domains, cap.domains[1:], cap.differences, bounds))
    ok = bool(para.decreasing and cap.decreasing and np.all(cap.differences <= bounds))
    detail = (
        f"paraboloid differences {', '.join(_g(d) for d in para.differences)}; "
        f"cap differences {', '.join(_g(d) for d in cap.differences)} within boundary error {', '.join(_g(b) for b in bounds)}"
    )
    return CheckResult(8, "nested domains", ok, detail, header, rows)


# -- 9 ---------------------------------------------------------------------------


def scaling_symmetry(seed: int = 0) -> CheckResult:
    """Parabolic rescaling of paraboloid runs by a factor 2."""
    header = ("mode", "rho", "n", "dx", "max_deviation", "bound", "passed")
    rows, ok = [], True
    quad = lambda x: np.sum(x**2, axis=-1)  # noqa: E731
    for n in (1, 2):
        for rho in (0.5, 1.0, 2.0):
            p = FlowParams(rho=rho, n=n, L=1.0, dx=0.02 if n == 1 else 0.05, t_end=0.05)
            for mode, same in (("mapped_grid", False), ("same_spacing", True)):
                rep = scaling_study(quad, p, 2.0, [0.01, 0.02], same_spacing=same)
                ok &= rep.passed
                rows.append((mode, rho, n, p.dx, rep.max_deviation, rep.bound, rep.passed))
    worst = {m: max(r[4] / r[5] for r in rows if r[0] == m) for m in ("mapped_grid", "same_spacing")}
    detail = f"worst deviation / (10 dx^2): mapped grid {_g(worst['mapped_grid'])}, same spacing {_g(worst['same_spacing'])}"
    return CheckResult(9, "scaling symmetry", bool(ok), detail, header, rows)


CHECKS: dict[int, tuple[str, Callable[[int], CheckResult]]] = {
    1: ("sphere_convergence", sphere_convergence),
    2: ("comparison_principle", comparison_principle),
    3: ("nu_condition", nu_condition),
    4: ("dual_concavity", dual_concavity),
    5: ("harnack", harnack),
    6: ("evolution_identities", evolution_identities),
    7: ("c2_bound", c2_bound),
    8: ("nested_domains", nested_domains),
    9: ("scaling_symmetry", scaling_symmetry),
}


def run_battery(seed: int = 0, only=None, progress: Callable[[CheckResult], None] | None = None) -> list[CheckResult]:
    """Run the numbered checks (all of them unless ``only`` lists some)."""
    results = []
    for number, (_, fn) in CHECKS.items():
        if only is not None and number not in only:
            continue
        start = time.perf_counter()
        res = fn(seed)
        res.seconds = time.perf_counter() - start
        results.append(res)
        if progress is not None:
            progress(res)
    return results


def write_battery(results, out: str | Path) -> Path:
    """One CSV per check plus ``paper_check.csv`` with the summary lines."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for res in results:
        write_csv(out / f"check_{res.number:02d}_{CHECKS[res.number][0]}.csv", res.header, res.rows)
    return write_csv(
        out / "paper_check.csv",
        ("check", "name", "passed", "detail"),
        [(r.number, r.name, r.passed, r.detail) for r in results],
    )
