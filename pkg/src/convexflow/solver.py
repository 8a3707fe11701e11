"""Explicit time stepping of the graphical H^rho flow ``u_t = W H^rho``."""

from __future__ import annotations

import dataclasses
import functools
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import _kernels
from .exact import SphereSolution, scenario, sphere_cap_graph, sphere_radius
from .geometry import GridFunction, GridSpec, geometry_fields

__all__ = [
    "BOUNDARY_POLICIES",
    "ConvexityLost",
    "StiffnessFailure",
    "FlowParams",
    "StepRecord",
    "Trajectory",
    "step",
    "run",
    "ComparisonReport",
    "comparison_run",
    "NestedDomainReport",
    "nested_domain_study",
    "ScalingReport",
    "scaling_study",
]

BOUNDARY_POLICIES = ("frozen", "barrier", "extrapolate")
MIN_DT = 1e-14


class ConvexityLost(RuntimeError):
    def __init__(self, node, t, H):
        self.node = tuple(int(i) for i in node)
        self.t = float(t)
        self.H = float(H)
        super().__init__(f"mean curvature {self.H:.3e} at node {self.node} at t={self.t:.17g}")


class StiffnessFailure(RuntimeError):
    def __init__(self, dt, t):
        self.dt = float(dt)
        self.t = float(t)
        super().__init__(f"time step {self.dt:.3e} underflows at t={self.t:.17g}")


@dataclass(frozen=True)
class FlowParams:
    """Run parameters.

    ``dt=None`` selects the parabolic CFL step with safety factor ``cfl``;
    a number fixes the step. ``boundary`` is one of ``"frozen"`` (Dirichlet,
    values held), ``"barrier"`` (Dirichlet from the exact cap of ``barrier``)
    or ``"extrapolate"`` (linear extrapolation of the interior update).
    """

    rho: float
    n: int
    L: float
    dx: float
    t_end: float
    cfl: float = 0.9
    dt: float | None = None
    boundary: str = "extrapolate"
    barrier: SphereSolution | None = None
    convexity_floor: float = 1e-12

    def __post_init__(self):
        errors = []
        if not self.rho > 0:
            errors.append("rho must be > 0")
        if self.n not in (1, 2):
            errors.append("n must be 1 or 2")
        if not self.t_end >= 0:
            errors.append("t_end must be >= 0")
        if not 0 < self.cfl <= 1:
            errors.append("cfl must be in (0, 1]")
        if self.dt is not None and not self.dt > 0:
            errors.append("dt must be > 0")
        if self.boundary not in BOUNDARY_POLICIES:
            errors.append(f"boundary must be one of {BOUNDARY_POLICIES}")
        if self.boundary == "barrier" and self.barrier is None:
            errors.append("barrier boundary needs a SphereSolution")
        if not self.convexity_floor >= 0:
            errors.append("convexity_floor must be >= 0")
        if errors:
            raise ValueError("; ".join(errors))
        self.grid  # validates L and dx

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.n, self.L, self.dx)

    def replace(self, **changes) -> "FlowParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class StepRecord:
    t: float
    dt: float
    min_H: float
    max_H: float
    max_grad: float
    max_speed: float
    masked: int

    FIELDS = ("t", "dt", "min_H", "max_H", "max_grad", "max_speed", "masked")

    def as_row(self) -> tuple:
        return tuple(getattr(self, k) for k in self.FIELDS)


@dataclass
class Trajectory:
    params: FlowParams
    snapshots: list[GridFunction] = field(default_factory=list)
    records: list[StepRecord] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @property
    def grid(self) -> GridSpec:
        return self.snapshots[0].grid

    def at(self, t: float, tol: float = 1e-12) -> GridFunction:
        """Snapshot recorded at time ``t``."""
        times = self.times
        i = int(np.argmin(np.abs(times - t)))
        if abs(times[i] - t) > tol * max(1.0, abs(t)):
            raise KeyError(f"no snapshot at t={t}; recorded times {times.tolist()}")
        return self.snapshots[i]

    @classmethod
    def from_snapshots(cls, params: FlowParams, snapshots: Sequence[GridFunction]) -> "Trajectory":
        """Wrap externally generated snapshots, for instance exact caps."""
        snaps = list(snapshots)
        if any(b.t <= a.t for a, b in zip(snaps, snaps[1:])):
            raise ValueError("snapshot times must be strictly increasing")
        return cls(params, snaps, [])


def _check_grid(u: GridFunction, params: FlowParams):
    if u.n != params.n or abs(u.dx - params.dx) > 1e-12 * params.dx or abs(
        u.half_width - params.L
    ) > 1e-9 * params.L:
        raise ValueError("grid function does not match the flow parameters")


class _Terms(NamedTuple):
    S: np.ndarray
    H: np.ndarray
    bad: tuple | None
    hmin: float
    hmax: float
    wmax: float
    smax: float
    cmax: float

    def dt(self, params):
        if params.dt is not None:
            return params.dt
        # parabolic CFL on the linearisation coefficient W rho H^(rho-1)
        return params.cfl * params.dx**2 / (2 * params.n * self.cmax)

    def record(self, t, dt):
        return StepRecord(
            t=float(t), dt=float(dt), min_H=self.hmin, max_H=self.hmax,
            max_grad=float(np.sqrt(self.wmax**2 - 1.0)), max_speed=self.smax, masked=0,
        )


def _speed_terms(values, params, t):
    shape = tuple(m - 2 for m in values.shape)
    S, H = np.empty(shape), np.empty(shape)
    hmin, imin, hmax, wmax, smax, cmax = _kernels.speed_terms(
        values, params.dx, float(params.rho), S, H
    )
    bad = None
    if not hmin > params.convexity_floor:
        bad = tuple(int(j) + 1 for j in np.unravel_index(imin, shape))
        raise ConvexityLost(bad, t, hmin)
    return _Terms(S, H, bad, hmin, hmax, wmax, smax, cmax)


def _extrapolate_boundary(delta):
    for axis in range(delta.ndim):
        d = np.moveaxis(delta, axis, 0)
        d[0] = 2.0 * d[1] - d[2]
        d[-1] = 2.0 * d[-2] - d[-3]
    return delta


@functools.lru_cache(maxsize=32)
def _edges(grid: GridSpec):
    edge = np.ones(grid.shape, dtype=bool)
    edge[grid.interior] = False
    return edge, grid.coords[edge]


def _cap_on_edges(sphere: SphereSolution, t: float, grid: GridSpec):
    edge, x = _edges(grid)
    r = sphere_radius(sphere, t)
    d2 = np.sum((x - np.asarray(sphere.center[:-1])) ** 2, axis=-1)
    return edge, sphere.center[-1] - np.sqrt(r * r - d2)


def _advance(values, t, S, dt, params):
    """Forward Euler update of ``values`` from ``t`` to ``t + dt``."""
    inner = (slice(1, -1),) * values.ndim
    delta = np.zeros_like(values)
    np.multiply(S, dt, out=delta[inner])
    if params.boundary == "extrapolate":
        _extrapolate_boundary(delta)
    new = values + delta
    if params.boundary == "barrier":
        edge, cap = _cap_on_edges(params.barrier, t + dt, params.grid)
        new[edge] = cap
    return new


def step(u: GridFunction, params: FlowParams, dt: float | None = None):
    """Advance ``u`` by one explicit step.

    Returns ``(u_new, record)``; the record describes the state ``u`` the
    step started from and the step size used.
    """
    _check_grid(u, params)
    values = np.asarray(u.values)
    terms = _speed_terms(values, params, u.t)
    if dt is None:
        dt = terms.dt(params)
    if dt < MIN_DT:
        raise StiffnessFailure(dt, u.t)
    new = _advance(values, u.t, terms.S, dt, params)
    return GridFunction(u.grid, new, u.t + dt), terms.record(u.t, dt)


def _time_grid(t_end, snapshot_times):
    stops = sorted({float(s) for s in (snapshot_times or ()) if 0 < s < t_end})
    return stops + [float(t_end)]


def run(
    u0: GridFunction,
    params: FlowParams,
    snapshot_times: Sequence[float] | None = None,
    snapshot_every: int | None = None,
    keep_records: bool = True,
) -> Trajectory:
    """Integrate from ``u0.t`` to ``params.t_end``.

    Snapshots are kept at ``u0``, at every requested time (steps are
    shortened to land on them exactly), every ``snapshot_every`` steps if
    given, and at ``t_end``. Strict convexity of ``u0`` is required only if
    there is something to integrate; with ``t_end == u0.t`` the datum is
    returned as a single snapshot.
    """
    _check_grid(u0, params)
    if params.t_end < u0.t:
        raise ValueError("t_end precedes the initial time")
    traj = Trajectory(params, [u0], [])
    if params.t_end == u0.t:
        # nothing to integrate, so convexity is not needed
        return traj
    fields = geometry_fields(u0, params.rho, params.convexity_floor)
    lam = fields.lambdas[u0.grid.interior]
    if not np.all(lam > 0):
        idx = np.unravel_index(int(np.argmin(lam.min(axis=-1))), lam.shape[:-1])
        node = tuple(i + 1 for i in idx)
        raise ConvexityLost(node, u0.t, fields.H[node])

    stops = [s for s in _time_grid(params.t_end, snapshot_times) if s > u0.t]
    values = np.array(u0.values)
    t = u0.t
    nstep = 0
    for stop in stops:
        while stop - t > 1e-13 * max(1.0, stop):
            terms = _speed_terms(values, params, t)
            dt = terms.dt(params)
            if dt < MIN_DT:
                raise StiffnessFailure(dt, t)
            dt = min(dt, stop - t)
            values = _advance(values, t, terms.S, dt, params)
            if keep_records:
                traj.records.append(terms.record(t, dt))
            nstep += 1
            # land exactly on the stop to keep snapshot times clean
            t = stop if stop - (t + dt) <= 1e-13 * max(1.0, stop) else t + dt
            if snapshot_every and nstep % snapshot_every == 0 and t < stop:
                traj.snapshots.append(GridFunction(u0.grid, values.copy(), t))
        if t > traj.snapshots[-1].t:
            traj.snapshots.append(GridFunction(u0.grid, values.copy(), t))
    return traj


def _lockstep(
    initial: Sequence[GridFunction],
    params_list: Sequence[FlowParams],
    t_end: float,
    observe: Callable[[float, list], None],
):
    """Advance several states with a shared step ``min(dt_k)``.

    ``observe(t, values_list)`` is called on the initial states and after
    every step.
    """
    values = [np.array(u.values) for u in initial]
    t = initial[0].t
    observe(t, values)
    while t_end - t > 1e-13 * max(1.0, t_end):
        terms = []
        for k, (v, p) in enumerate(zip(values, params_list)):
            try:
                terms.append(_speed_terms(v, p, t))
            except ConvexityLost as exc:
                exc.state_index = k
                raise
        dt = min(tm.dt(p) for tm, p in zip(terms, params_list))
        if dt < MIN_DT:
            raise StiffnessFailure(dt, t)
        dt = min(dt, t_end - t)
        values = [_advance(v, t, tm.S, dt, p) for v, tm, p in zip(values, terms, params_list)]
        t = t_end if t_end - (t + dt) <= 1e-13 * max(1.0, t_end) else t + dt
        observe(t, values)


@dataclass
class ComparisonReport:
    dx: float
    max_violation: float
    times: np.ndarray
    violations: np.ndarray
    bound: float

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.bound


def comparison_run(
    u0_low: GridFunction, u0_high: GridFunction | SphereSolution, params: FlowParams
) -> ComparisonReport:
    """Evolve an ordered pair and record ``max (u_low - u_high)^+`` over time.

    ``u0_high`` may be a :class:`SphereSolution`, in which case its exact
    lower cap is the upper state and only ``u0_low`` is integrated.
    """
    _check_grid(u0_low, params)
    times, viol = [], []
    if isinstance(u0_high, SphereSolution):
        sphere = u0_high
        grid = params.grid

        def observe(t, vals):
            cap = sphere_cap_graph(sphere, t, grid).values
            times.append(t)
            viol.append(max(0.0, float(np.max(vals[0] - cap))))

        _lockstep([u0_low], [params], params.t_end, observe)
    else:
        _check_grid(u0_high, params)
        if np.any(u0_low.values > u0_high.values):
            raise ValueError("initial data are not ordered")

        def observe(t, vals):
            times.append(t)
            viol.append(max(0.0, float(np.max(vals[0] - vals[1]))))

        _lockstep([u0_low, u0_high], [params, params], params.t_end, observe)
    viol_arr = np.array(viol)
    return ComparisonReport(
        dx=params.dx, max_violation=float(viol_arr.max()), times=np.array(times),
        violations=viol_arr, bound=10 * params.dx**2,
    )


@dataclass
class NestedDomainReport:
    domains: tuple[float, ...]
    window: float
    differences: np.ndarray
    degenerate: bool
    reference_errors: np.ndarray | None = None

    @property
    def ratios(self) -> np.ndarray:
        d = self.differences
        return d[1:] / d[:-1] if len(d) > 1 else np.array([])

    @property
    def decreasing(self) -> bool:
        d = self.differences
        return bool(len(d) == 0 or np.all(np.diff(d) < 0))


def nested_domain_study(
    u0: Callable[[GridSpec], GridFunction] | str,
    params: FlowParams,
    domains: Sequence[float],
    reference: Callable[[float, GridSpec], np.ndarray] | None = None,
    **scenario_params,
) -> NestedDomainReport:
    """Run the flow on nested boxes and compare on a common window.

    ``u0`` is a grid-to-data callable or a scenario name. The window is
    ``[-L_1/2, L_1/2]^n``; the k-th entry of ``differences`` is the sup over
    the window and all steps of ``|u^(k+1) - u^(k)|``. Every domain takes the
    same time steps so that only truncation separates the runs.

    If ``reference(t, window_grid)`` gives exact values, ``reference_errors``
    holds each domain's sup error against it over the same window and steps.
    """
    domains = tuple(float(L) for L in domains)
    if any(b <= a for a, b in zip(domains, domains[1:])):
        raise ValueError("domains must be strictly increasing")
    window = domains[0] / 2
    if len(domains) < 2:
        return NestedDomainReport(domains, window, np.array([]), True)
    gen = (lambda g: scenario(u0, g, **scenario_params)) if isinstance(u0, str) else u0
    plist = [params.replace(L=L) for L in domains]
    initial = []
    for p in plist:
        try:
            initial.append(gen(p.grid))
        except ValueError as exc:
            raise ValueError(f"L={p.L}: {exc}") from exc
    m = GridSpec(params.n, window, params.dx).nodes_per_axis
    offsets = [(p.grid.nodes_per_axis - m) // 2 for p in plist]
    diffs = np.zeros(len(domains) - 1)
    errs = np.zeros(len(domains)) if reference is not None else None
    window_grid = GridSpec(params.n, window, params.dx)

    def observe(t, vals):
        wins = [v[(slice(o, o + m),) * params.n] for v, o in zip(vals, offsets)]
        for k in range(len(wins) - 1):
            diffs[k] = max(diffs[k], float(np.max(np.abs(wins[k + 1] - wins[k]))))
        if errs is not None:
            exact = reference(t, window_grid)
            for k, w in enumerate(wins):
                errs[k] = max(errs[k], float(np.max(np.abs(w - exact))))

    try:
        _lockstep(initial, plist, params.t_end, observe)
    except ConvexityLost as exc:
        exc.L = domains[getattr(exc, "state_index", 0)]
        raise
    return NestedDomainReport(domains, window, diffs, len(domains) < 3, errs)


@dataclass
class ScalingReport:
    factor: float
    times: np.ndarray
    deviations: np.ndarray
    bound: float

    @property
    def max_deviation(self) -> float:
        return float(self.deviations.max())

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.bound


def scaling_study(
    u0: GridFunction | Callable[[np.ndarray], np.ndarray],
    params: FlowParams,
    factor: float = 2.0,
    snapshot_times: Sequence[float] | None = None,
    same_spacing: bool = False,
) -> ScalingReport:
    """Compare a run with its parabolic rescaling.

    If ``u`` solves the flow then so does ``lam u(x / lam, t / lam^(rho+1))``.
    By default the rescaled datum lives on the grid with ``L`` and ``dx``
    multiplied by ``lam``; its nodes are the images of the original ones, so
    the two runs agree up to rounding. With ``same_spacing=True`` the rescaled
    run keeps ``dx`` (``lam`` must then be an integer and ``u0`` a function
    of the coordinates), which compares two genuinely different
    discretizations at every ``lam``-th node. Deviations are in the original
    units and the bound is ``10 dx^2``.
    """
    if not factor > 0:
        raise ValueError("factor must be positive")
    grid = params.grid
    if isinstance(u0, GridFunction):
        if same_spacing:
            raise ValueError("same_spacing needs u0 as a function of the coordinates")
        _check_grid(u0, params)
        start = u0
    else:
        start = GridFunction.from_function(u0, grid)
    tscale = factor ** (params.rho + 1)
    stride = 1
    if same_spacing:
        stride = int(round(factor))
        if abs(stride - factor) > 1e-12 or stride < 1:
            raise ValueError("same_spacing needs an integer factor")
        big = params.replace(L=params.L * factor, t_end=params.t_end * tscale)
        v0 = GridFunction.from_function(lambda x: factor * u0(x / factor), big.grid, start.t * tscale)
    else:
        big = params.replace(L=params.L * factor, dx=params.dx * factor, t_end=params.t_end * tscale)
        v0 = GridFunction(big.grid, factor * np.asarray(start.values), start.t * tscale)
    if params.dt is not None:
        big = big.replace(dt=params.dt * tscale if not same_spacing else params.dt * tscale / stride**2)
    times = sorted(set(snapshot_times or ()) | {params.t_end})
    a = run(start, params, snapshot_times=times, keep_records=False)
    b = run(v0, big, snapshot_times=[t * tscale for t in times], keep_records=False)
    pick = (slice(None, None, stride),) * params.n
    devs = []
    for t in [start.t] + times:
        vb = np.asarray(b.at(t * tscale, tol=1e-9 * max(1.0, t * tscale)).values)[pick]
        devs.append(float(np.max(np.abs(np.asarray(a.at(t).values) - vb / factor))))
    return ScalingReport(factor, np.array([start.t] + times), np.array(devs), 10 * params.dx**2)
