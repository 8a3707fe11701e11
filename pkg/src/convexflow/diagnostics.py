"""Monitored quantities and inequalities along computed or exact flows.

Every function here reads a :class:`~convexflow.geometry.GridFunction` or a
:class:`~convexflow.solver.Trajectory` and never modifies it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .exact import SphereSolution, sphere_radius
from .geometry import GridFunction, derivatives, geometry_fields
from .solver import Trajectory

__all__ = [
    "PatchInvalid",
    "DirectionNotAttained",
    "NuProfile",
    "nu_profile",
    "NuPreservationReport",
    "nu_preservation_check",
    "Patch",
    "C2Monitor",
    "c2_monitor",
    "c2_closed_form",
    "evolution_identity_check",
    "dual_matrix",
    "principal_minor_formula",
    "dual_matrix_from_fd",
    "dual_hessian",
    "dual_fd_error",
    "DualConcavityReport",
    "dual_concavity_check",
    "HarnackRecord",
    "harnack_check",
    "harnack_sphere",
    "harnack_tolerance",
    "locate_normal",
    "VelocityFloorReport",
    "velocity_floor_check",
    "DisjointnessReport",
    "normal_image_disjointness",
]


class PatchInvalid(ValueError):
    def __init__(self, t, reason):
        self.t = float(t)
        super().__init__(f"patch invalid at t={self.t:.17g}: {reason}")


class DirectionNotAttained(ValueError):
    """The requested normal lies outside the discrete normal image."""


# -- normal oscillation ---------------------------------------------------------


@dataclass
class NuProfile:
    radii: np.ndarray
    eps_of_r: np.ndarray
    pair_count: np.ndarray
    pair_distance: float = 1.0

    @property
    def empty(self) -> np.ndarray:
        return self.pair_count == 0

    def decays(self, threshold: float = 0.2) -> bool:
        """Strictly decreasing over non-empty radii and below ``threshold`` at the last one."""
        e = self.eps_of_r[~self.empty]
        return bool(len(e) >= 2 and np.all(np.diff(e) < 0) and e[-1] < threshold)


def _graph_points(u: GridFunction, stride: int):
    Du, _ = derivatives(u)
    sl = (slice(None, None, stride),) * u.n
    x = u.grid.coords[sl].reshape(-1, u.n)
    z = np.asarray(u.values)[sl].reshape(-1, 1)
    p = Du[sl].reshape(-1, u.n)
    W = np.sqrt(1.0 + np.sum(p**2, axis=-1, keepdims=True))
    nu = np.hstack([p, -np.ones_like(z)]) / W
    return np.hstack([x, z]), nu


def nu_profile(
    u: GridFunction,
    radii: Sequence[float],
    stride: int = 1,
    pair_distance: float = 1.0,
) -> NuProfile:
    """Largest normal oscillation over near pairs outside each ball.

    For each ``r`` the result is ``sup |nu(p) - nu(q)|`` over graph points
    ``p, q`` sampled at every ``stride``-th node with ``|p - q| <
    pair_distance`` and ``|p|, |q| >= r`` (norms in R^{n+1}). Radii without
    an admissible pair are reported as NaN with a zero pair count.
    """
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be strictly increasing")
    P, nu = _graph_points(u, stride)
    norms = np.linalg.norm(P, axis=1)
    if norms.max() < radii.max() + pair_distance:
        raise ValueError(
            f"graph reaches only |p| = {norms.max():.4g}; radius {radii.max()} needs "
            f"{radii.max() + pair_distance:.4g}"
        )
    pairs = cKDTree(P).query_pairs(pair_distance, output_type="ndarray")
    if len(pairs):
        i, j = pairs[:, 0], pairs[:, 1]
        keep = np.sum((P[i] - P[j]) ** 2, axis=1) < pair_distance**2
        i, j = i[keep], j[keep]
        osc = np.linalg.norm(nu[i] - nu[j], axis=1)
        outer = np.minimum(norms[i], norms[j])
    else:
        osc = outer = np.array([])
    eps = np.full(len(radii), np.nan)
    count = np.zeros(len(radii), dtype=int)
    for k, r in enumerate(radii):
        sel = outer >= r
        count[k] = int(np.count_nonzero(sel))
        if count[k]:
            eps[k] = float(np.max(osc[sel]))
    return NuProfile(radii, eps, count, pair_distance)


@dataclass
class NuPreservationReport:
    times: np.ndarray
    profiles: list[NuProfile]
    slack: float

    @property
    def excess(self) -> np.ndarray:
        """``eps(t) - eps(0)`` per snapshot and radius (NaN where empty)."""
        base = self.profiles[0].eps_of_r
        return np.array([p.eps_of_r - base for p in self.profiles])

    @property
    def passed(self) -> bool:
        ex = self.excess
        ok = np.isnan(ex) | (ex <= self.slack)
        return bool(np.all(ok))


def nu_preservation_check(
    traj: Trajectory, radii, stride: int = 1, pair_distance: float = 1.0
) -> NuPreservationReport:
    """Profile every snapshot; pass if ``eps(t) <= eps(0) + 10 dx`` throughout."""
    profiles = [nu_profile(s, radii, stride, pair_distance) for s in traj.snapshots]
    return NuPreservationReport(traj.times, profiles, 10 * traj.grid.dx)


# -- localized curvature bound --------------------------------------------------


@dataclass(frozen=True)
class Patch:
    """Tilted frame at a seed point of the initial graph.

    The new vertical axis is ``e = -nu(seed)``; the new origin sits at
    ``height`` above the seed along ``e``. The patch is the part of the
    surface with non-positive new height; inside it the tilted graph must
    have gradient at most ``G``.
    """

    seed: tuple[float, ...]
    height: float
    G: float


@dataclass
class C2Monitor:
    beta: float
    patch: Patch
    axis: np.ndarray
    origin: np.ndarray
    times: np.ndarray
    localized: np.ndarray
    time_weighted: np.ndarray
    patch_sizes: np.ndarray

    @property
    def quarter_max(self) -> float:
        t = self.times
        window = t <= t[0] + 0.25 * (t[-1] - t[0])
        return float(np.nanmax(self.time_weighted[window]))

    @property
    def exceeded(self) -> bool:
        """Series rises above three times its first-quarter maximum."""
        return bool(np.nanmax(self.time_weighted) > 3 * self.quarter_max)


def _patch_frame(u0: GridFunction, patch: Patch):
    idx = u0.grid.index_of(patch.seed)
    Du, _ = derivatives(u0)
    p = Du[idx]
    W = np.sqrt(1.0 + p @ p)
    nu_s = np.append(p, -1.0) / W
    X_s = np.append(u0.grid.coords[idx], u0.values[idx])
    e = -nu_s
    return e, X_s + patch.height * e


def _patch_quantities(u: GridFunction, e, origin, rho, beta, nu=None, F=None):
    inner = u.grid.interior
    if nu is None or F is None:
        fields = geometry_fields(u, rho)
        nu, F = fields.nu, fields.F
    X = np.concatenate([u.grid.coords, np.asarray(u.values)[..., None]], axis=-1)
    height = (X - origin) @ e
    inside = height <= 0
    cos = nu @ (-e)
    v = np.full(cos.shape, np.inf)
    np.divide(1.0, cos, out=v, where=cos > 0)
    q = np.full(height.shape, np.nan)
    ok = inside & np.isfinite(v) & np.isfinite(F)
    q[ok] = (-height[ok]) ** rho * F[ok] * np.exp(beta * v[ok] * rho)
    return inside, inner, q, v


def c2_monitor(traj: Trajectory, beta: float, patch: Patch, rho: float | None = None) -> C2Monitor:
    """Patch maxima of ``depth^rho F exp(beta v rho)`` and of ``t^rho`` times it.

    ``depth`` is the distance below the tilted plane and ``v`` the gradient
    function in the tilted frame. Raises :class:`PatchInvalid` when a
    snapshot's patch touches the grid edge, or its tilted gradient
    ``sqrt(v^2 - 1)`` exceeds ``G``.
    """
    if not beta > 1:
        raise ValueError("beta must exceed 1")
    rho = traj.params.rho if rho is None else rho
    e, origin = _patch_frame(traj.snapshots[0], patch)
    loc, tw, sizes = [], [], []
    for snap in traj.snapshots:
        inside, inner, q, v = _patch_quantities(snap, e, origin, rho, beta)
        edge = inside.copy()
        edge[inner] = False
        if np.any(edge):
            raise PatchInvalid(snap.t, "patch reaches the grid boundary")
        if np.any(inside):
            grad = np.sqrt(np.maximum(v[inside] ** 2 - 1.0, 0.0))
            if not np.all(v[inside] > 0) or grad.max() > patch.G:
                raise PatchInvalid(snap.t, f"tilted gradient {grad.max():.4g} exceeds G={patch.G}")
            m = float(np.nanmax(q))
        else:
            m = np.nan
        sizes.append(int(np.count_nonzero(inside)))
        loc.append(m)
        tw.append(snap.t**rho * m)
    return C2Monitor(beta, patch, e, origin, traj.times, np.array(loc), np.array(tw), np.array(sizes))


def c2_closed_form(s: SphereSolution, times, grid, beta, patch: Patch):
    """Exact counterpart of :func:`c2_monitor` on the caps of ``s``.

    Uses exact heights, normals and ``F = (c_H / r)^rho`` at the same nodes,
    so the difference to the monitor is pure differencing error.
    Returns ``(localized, time_weighted)`` arrays.
    """
    c_h = np.asarray(s.center[:-1])
    x = grid.coords
    loc, tw = [], []
    e = origin = None
    for t in times:
        r = sphere_radius(s, t)
        root = np.sqrt(r * r - np.sum((x - c_h) ** 2, axis=-1))
        values = s.center[-1] - root
        p = (x - c_h) / root[..., None]
        W = r / root
        nu = np.concatenate([p, -np.ones(root.shape + (1,))], axis=-1) / W[..., None]
        if e is None:
            idx = grid.index_of(patch.seed)
            e = -nu[idx]
            origin = np.append(x[idx], values[idx]) + patch.height * e
        F = np.full(root.shape, (s.c_H / r) ** s.rho)
        u = GridFunction(grid, values, t)
        _, _, q, _ = _patch_quantities(u, e, origin, s.rho, beta, nu=nu, F=F)
        m = float(np.nanmax(q)) if np.any(np.isfinite(q)) else np.nan
        loc.append(m)
        tw.append(t**s.rho * m)
    return np.array(loc), np.array(tw)


# -- evolution equations on the sphere -----------------------------------------


def _fd_step(s: SphereSolution, t, step):
    # relative to the nearer end of (0, t*), where the radius law is smooth
    h = step * min(t, s.extinction_time - t)
    if h <= 1e-300 or h < 1e-14 * t:
        raise ValueError("t too close to 0 or to extinction for a centred difference")
    return h


def _ddt(f, t, h):
    """Centred difference with one Richardson extrapolation, O(h^4)."""
    d1 = (f(t + h) - f(t - h)) / (2 * h)
    d2 = (f(t + h / 2) - f(t - h / 2)) / h
    return (4 * d2 - d1) / 3


def evolution_identity_check(
    s: SphereSolution, t: float, identity: str = "F", polar: float = 0.3, step: float = 1e-4
) -> float:
    """Relative residual of an evolution identity on the exact sphere.

    ``identity`` selects one of

    - ``"F"``: ``dF/dt - F^ij F_;ij = F F^ij h_i^k h_kj``
    - ``"v"``: ``dv/dt - F^ij v_;ij = -v F^ij h_i^k h_kj - 2 F^ij v_i v_j / v``
    - ``"X"``: ``dX/dt - F^ij X_;ij = (F^ij h_ij - F) nu``

    Time derivatives follow a material point (fixed normal, at ``polar``
    radians from the south pole) and are taken by Richardson-extrapolated
    centred differences with step ``step * min(t, t* - t)``. Spatial terms use the sphere's closed forms: ``h_ij =
    g_ij / r``, ``F^ij = rho H^(rho-1) g^ij``, so ``F^ij h_i^k h_kj = rho
    H^(rho-1) n / r^2``.
    """
    if not 0 < t < s.extinction_time:
        raise ValueError("t must lie strictly between 0 and the extinction time")
    if not 0 <= polar < np.pi / 2:
        raise ValueError("polar angle must lie in [0, pi/2)")
    h = _fd_step(s, t, step)
    n, rho = s.n, s.rho
    r = sphere_radius(s, t)
    H = s.c_H / r
    F = H**rho
    a = rho * H ** (rho - 1.0)
    trace_A2 = n / r**2
    cos = np.cos(polar)
    nu = np.zeros(n + 1)
    nu[0] = np.sin(polar)
    nu[-1] = -cos
    center = np.asarray(s.center)

    if identity == "F":
        dF = _ddt(lambda tt: (s.c_H / sphere_radius(s, tt)) ** rho, t, h)
        lhs = dF  # F is constant on each sphere
        rhs = F * a * trace_A2
        return abs(lhs - rhs) / abs(rhs)
    if identity == "v":
        def v_at(tt):
            X = center + sphere_radius(s, tt) * nu
            return sphere_radius(s, tt) / (center[-1] - X[-1])

        dv = _ddt(v_at, t, h)
        vt = cos  # tilde v = -<e_{n+1}, nu>
        v = 1.0 / vt
        grad_vt2 = (1.0 - vt**2) / r**2
        lap_vt = -n * vt / r**2
        lap_v = -lap_vt / vt**2 + 2.0 * grad_vt2 / vt**3
        grad_v2 = grad_vt2 / vt**4
        lhs = dv - a * lap_v
        rhs = -v * a * trace_A2 - 2.0 * a * grad_v2 / v
        return abs(lhs - rhs) / abs(rhs)
    if identity == "X":
        def X_at(tt):
            return center + sphere_radius(s, tt) * nu

        dX = _ddt(X_at, t, h)
        trace_h = a * H  # F^ij h_ij
        lhs = dX + trace_h * nu  # X_;ij = -h_ij nu
        rhs = (trace_h - F) * nu
        return float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), F))
    raise ValueError(f"unknown identity {identity!r}; use 'F', 'v' or 'X'")


# -- dual function concavity ----------------------------------------------------


def dual_matrix(lam, rho) -> np.ndarray:
    """``2 rho D^(rho-2) (-l_i^-2 l_j^-2 + D l_i^-3 delta_ij)`` with ``D = sum 1/l_i``."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("principal curvatures must be positive")
    D = np.sum(1.0 / lam)
    w = lam**-2
    return 2 * rho * D ** (rho - 2) * (-np.outer(w, w) + np.diag(D * lam**-3))


def principal_minor_formula(lam, rho, k, as_printed: bool = False) -> float:
    """Closed form of the k-th leading principal minor of :func:`dual_matrix`.

    The minor is ``(2 rho D^(rho-1))^k (prod_{i<=k} 1/l_i)^3 (D - sum_{i<=k}
    1/l_i) / D``. ``as_printed=True`` divides by the product of cubes
    instead of multiplying; that variant only agrees at ``l = (1, ..., 1)``.
    """
    lam = np.asarray(lam, dtype=float)
    D = np.sum(1.0 / lam)
    inv = 1.0 / lam[:k]
    cube = np.prod(inv) ** 3
    head = (2 * rho * D ** (rho - 1)) ** k * (D - np.sum(inv)) / D
    return float(head / cube if as_printed else head * cube)


def _phi(lam, rho):
    return -np.sum(1.0 / lam) ** rho


def dual_hessian(lam, rho) -> np.ndarray:
    """Analytic Hessian of ``Phi = -D^rho`` in the variables ``l_i``."""
    lam = np.asarray(lam, dtype=float)
    D = np.sum(1.0 / lam)
    w = lam**-2
    return -rho * D ** (rho - 2) * ((rho - 1) * np.outer(w, w) + np.diag(2 * D * lam**-3))


def _fd_derivatives(lam, rho, step):
    n = len(lam)
    hs = step * lam
    grad = np.empty(n)
    hess = np.empty((n, n))
    f0 = _phi(lam, rho)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = hs[i]
        fp, fm = _phi(lam + ei, rho), _phi(lam - ei, rho)
        grad[i] = (fp - fm) / (2 * hs[i])
        hess[i, i] = (fp - 2 * f0 + fm) / hs[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = hs[j]
            val = (
                _phi(lam + ei + ej, rho) - _phi(lam + ei - ej, rho)
                - _phi(lam - ei + ej, rho) + _phi(lam - ei - ej, rho)
            ) / (4 * hs[i] * hs[j])
            hess[i, j] = hess[j, i] = val
    return f0, grad, hess


def dual_matrix_from_fd(lam, rho, step: float = 1e-5) -> np.ndarray:
    """Rebuild :func:`dual_matrix` from finite differences of ``Phi = -D^rho``.

    The assembled matrix equals ``-Hess Phi - (1 + rho) / (rho |Phi|) grad
    Phi grad Phi^T``; both derivatives here are centred differences with
    relative perturbation ``step``.
    """
    lam = np.asarray(lam, dtype=float)
    f0, grad, hess = _fd_derivatives(lam, rho, step)
    return -hess - (1 + rho) / (rho * abs(f0)) * np.outer(grad, grad)


def dual_fd_error(lam, rho, step: float = 1e-5) -> float:
    """Relative error of :func:`dual_matrix_from_fd`.

    The two terms being differenced nearly cancel when the ``l_i`` are far
    apart, so the error is measured against their combined size
    ``||Hess Phi|| + (1 + rho) / (rho |Phi|) ||grad Phi||^2`` rather than
    against the (much smaller) difference.
    """
    lam = np.asarray(lam, dtype=float)
    f0, grad, hess = _fd_derivatives(lam, rho, step)
    approx = -hess - (1 + rho) / (rho * abs(f0)) * np.outer(grad, grad)
    exact_grad = rho * np.sum(1.0 / lam) ** (rho - 1) * lam**-2
    scale = np.linalg.norm(dual_hessian(lam, rho), 2) + (1 + rho) / (rho * abs(f0)) * (exact_grad @ exact_grad)
    return float(np.linalg.norm(approx - dual_matrix(lam, rho), 2) / scale)


@dataclass
class DualConcavityReport:
    rho: float
    samples: int
    worst_eig_ratio: float
    worst_minor_error: float
    worst_fd_error: float = np.nan
    printed_minor_error: float = np.nan
    eig_tol: float = 1e-10
    minor_tol: float = 1e-8
    fd_tol: float = 1e-4

    @property
    def passed(self) -> bool:
        ok = self.worst_eig_ratio >= -self.eig_tol and self.worst_minor_error <= self.minor_tol
        if np.isfinite(self.worst_fd_error):
            ok = ok and self.worst_fd_error <= self.fd_tol
        return bool(ok)


def dual_concavity_check(rho: float, samples, fd: bool = True) -> DualConcavityReport:
    """Check positive semidefiniteness and the minor formula on each sample row.

    ``worst_eig_ratio`` is the smallest ``min eigenvalue / ||M||``;
    minor errors are measured against the Hadamard bound ``prod_{i<=k}
    M_ii`` so the vanishing full minor is handled uniformly.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if np.any(samples <= 0):
        raise ValueError("principal curvatures must be positive")
    eig_ratio, minor_err, printed_err, fd_err = np.inf, 0.0, 0.0, 0.0
    for lam in samples:
        M = dual_matrix(lam, rho)
        norm = np.linalg.norm(M, 2)
        eig_ratio = min(eig_ratio, float(np.linalg.eigvalsh(M).min() / norm))
        for k in range(1, len(lam) + 1):
            direct = np.linalg.det(M[:k, :k])
            scale = max(np.prod(np.abs(np.diag(M)[:k])), abs(direct))
            minor_err = max(minor_err, abs(principal_minor_formula(lam, rho, k) - direct) / scale)
            printed = principal_minor_formula(lam, rho, k, as_printed=True)
            printed_err = max(printed_err, abs(printed - direct) / max(scale, abs(printed)))
        if fd:
            fd_err = max(fd_err, dual_fd_error(lam, rho))
    return DualConcavityReport(
        rho=float(rho), samples=len(samples), worst_eig_ratio=float(eig_ratio),
        worst_minor_error=float(minor_err), worst_fd_error=float(fd_err) if fd else np.nan,
        printed_minor_error=float(printed_err),
    )


# -- Harnack inequality and lower speed bounds ---------------------------------


def _quadratic_fit(values, dx):
    """Least-squares quadratic on a 3 or 3x3 stencil; returns (coef, design)."""
    if values.ndim == 1:
        s = np.array([-1.0, 0.0, 1.0]) * dx
        A = np.column_stack([np.ones(3), s, s * s])
        return np.linalg.solve(A, values), "1d"
    s = np.array([-1.0, 0.0, 1.0]) * dx
    X, Y = np.meshgrid(s, s, indexing="ij")
    X, Y = X.ravel(), Y.ravel()
    A = np.column_stack([np.ones(9), X, Y, X * X, X * Y, Y * Y])
    coef, *_ = np.linalg.lstsq(A, values.ravel(), rcond=None)
    return coef, "2d"


def _eval_quadratic(coef, kind, offset):
    if kind == "1d":
        s = offset[0]
        return coef[0] + coef[1] * s + coef[2] * s * s
    x, y = offset
    return coef[0] + coef[1] * x + coef[2] * y + coef[3] * x * x + coef[4] * x * y + coef[5] * y * y


def locate_normal(u: GridFunction, p, rho: float, fields=None):
    """Point where the normal of ``u`` equals ``p``, and ``(F, H)`` there.

    Scans interior nodes for the smallest ``|nu - p|``, then takes one Newton
    step on ``Du(x) = -p' / p_{n+1}`` (exact for quadratics). ``F`` and ``H``
    are read off a quadratic fit on the surrounding stencil. Returns
    ``(x, F, H)``; raises :class:`DirectionNotAttained` when ``p`` is not a
    downward normal or the Newton step leaves the cell of the nearest node.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (u.n + 1,):
        raise ValueError(f"direction needs {u.n + 1} components")
    p = p / np.linalg.norm(p)
    if not p[-1] < 0:
        raise DirectionNotAttained(f"{p} is not a downward normal")
    fields = geometry_fields(u, rho) if fields is None else fields
    inner = u.grid.interior
    d2 = np.sum((fields.nu - p) ** 2, axis=-1)
    d2_in = d2[inner]
    flat = int(np.argmin(d2_in))
    idx = tuple(int(i) + 1 for i in np.unravel_index(flat, d2_in.shape))
    slope = -p[:-1] / p[-1]
    try:
        off = np.linalg.solve(fields.D2u[idx], slope - fields.Du[idx])
    except np.linalg.LinAlgError:
        off = np.full(u.n, np.inf)
    if not np.all(np.abs(off) <= 1.5 * u.dx):
        raise DirectionNotAttained(
            f"normal {p} not attained near node {idx} (Newton offset {off}) at t={u.t:.6g}"
        )
    off = np.clip(off, -u.dx, u.dx)
    near = tuple(slice(i - 1, i + 2) for i in idx)
    fcoef, kind = _quadratic_fit(fields.F[near], u.dx)
    hcoef, _ = _quadratic_fit(fields.H[near], u.dx)
    x = u.grid.coords[idx] + off
    return x, float(_eval_quadratic(fcoef, kind, off)), float(_eval_quadratic(hcoef, kind, off))


def harnack_tolerance(dx: float, t1: float) -> float:
    """Relative slack ``50 dx^2 / min(t1, 1)`` allowed below the Harnack bound."""
    return 50 * dx**2 / min(t1, 1.0)


@dataclass
class HarnackRecord:
    direction: np.ndarray
    t1: float
    t2: float
    x1: np.ndarray
    x2: np.ndarray
    F1: float
    F2: float
    rho: float
    dx: float

    @property
    def ratio(self) -> float:
        return self.F2 / self.F1

    @property
    def bound(self) -> float:
        return (self.t1 / self.t2) ** (self.rho / (self.rho + 1))

    @property
    def threshold(self) -> float:
        return self.bound * (1 - harnack_tolerance(self.dx, self.t1))

    @property
    def passed(self) -> bool:
        return bool(self.F1 > 0 and self.F2 > 0 and self.ratio >= self.threshold)


def harnack_check(traj: Trajectory, p, t1: float, t2: float, rho: float | None = None) -> HarnackRecord:
    """Compare speeds at normal ``p`` between snapshots ``t1 <= t2``."""
    if not 0 < t1 <= t2:
        raise ValueError("need 0 < t1 <= t2")
    rho = traj.params.rho if rho is None else rho
    x1, F1, _ = locate_normal(traj.at(t1), p, rho)
    x2, F2, _ = locate_normal(traj.at(t2), p, rho)
    return HarnackRecord(np.asarray(p, float), t1, t2, x1, x2, F1, F2, rho, traj.grid.dx)


def harnack_sphere(s: SphereSolution, t1: float, t2: float) -> HarnackRecord:
    """Exact record for a shrinking sphere, where every normal sees ``F = (c_H / r)^rho``."""
    if not 0 < t1 <= t2:
        raise ValueError("need 0 < t1 <= t2")
    x = np.asarray(s.center[:-1], dtype=float)
    p = np.zeros(s.n + 1)
    p[-1] = -1.0
    F1, F2 = s.speed(t1), s.speed(t2)
    return HarnackRecord(p, t1, t2, x, x, float(F1), float(F2), s.rho, 0.0)


@dataclass
class VelocityFloorReport:
    x: np.ndarray
    t_x: float
    times: np.ndarray
    curvatures: np.ndarray
    margin: float

    @property
    def floor(self) -> float:
        return float(np.min(self.curvatures))

    @property
    def passed(self) -> bool:
        return self.floor > self.margin


def velocity_floor_check(traj: Trajectory, x, t_x: float, rho: float | None = None) -> VelocityFloorReport:
    """Smallest ``H`` on ``[t_x/2, t_x]`` at the point sharing the initial normal at ``x``."""
    if not t_x > 0:
        raise ValueError("t_x must be positive")
    rho = traj.params.rho if rho is None else rho
    u0 = traj.snapshots[0]
    f0 = geometry_fields(u0, rho)
    p = f0.nu[u0.grid.index_of(x)]
    times, curv = [], []
    for snap in traj.snapshots:
        if t_x / 2 - 1e-12 <= snap.t <= t_x + 1e-12:
            _, _, H = locate_normal(snap, p, rho)
            times.append(snap.t)
            curv.append(H)
    if not times:
        raise ValueError(f"no snapshot in [{t_x / 2}, {t_x}]")
    margin = 10 * traj.params.convexity_floor
    return VelocityFloorReport(np.asarray(x, float), t_x, np.array(times), np.array(curv), margin)


@dataclass
class DisjointnessReport:
    r: float
    R: float
    times: np.ndarray
    separations: np.ndarray
    margin: float

    @property
    def overlaps(self) -> np.ndarray:
        return self.separations <= self.margin

    @property
    def passed(self) -> bool:
        return not bool(np.any(self.overlaps))


def normal_image_disjointness(traj: Trajectory, r: float, R: float, T: float) -> DisjointnessReport:
    """Distance between ``Du(B_r, t)`` and ``Du(outside B_R, 0)`` for snapshots ``t <= T``.

    Sets closer than ``2 dx max|D^2 u|`` count as overlapping.
    """
    if not R > r > 0:
        raise ValueError("need R > r > 0")
    grid = traj.grid
    if R >= grid.half_width:
        raise ValueError("R must lie inside the grid")
    radius = np.linalg.norm(grid.coords, axis=-1)
    Du0, D2u0 = derivatives(traj.snapshots[0])
    outer = Du0[radius > R].reshape(-1, grid.n)
    tree = cKDTree(outer)
    curv = float(np.max(np.linalg.norm(D2u0, ord=2, axis=(-2, -1)) if grid.n > 1 else np.abs(D2u0)))
    times, seps = [], []
    for snap in traj.snapshots:
        if snap.t > T + 1e-12:
            break
        Du, D2u = derivatives(snap)
        curv = max(curv, float(np.max(np.abs(D2u)) if grid.n == 1 else np.max(np.linalg.norm(D2u, ord=2, axis=(-2, -1)))))
        inner = Du[radius < r].reshape(-1, grid.n)
        d, _ = tree.query(inner)
        times.append(snap.t)
        seps.append(float(d.min()))
    return DisjointnessReport(r, R, np.array(times), np.array(seps), 2 * grid.dx * curv)
