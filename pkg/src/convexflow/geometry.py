"""Pointwise geometry of a graph sampled on a uniform grid.

All quantities follow the standard graph formulas::

    g_ij = delta_ij + u_i u_j          g^ij = delta^ij - u^i u^j / W^2
    nu   = (Du, -1) / W                h_ij = u_ij / W
    H    = g^ij h_ij                   K    = det(h) / det(g)

with ``W = sqrt(1 + |Du|^2)``. Derivatives are second-order finite
differences: central at interior nodes, one-sided at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GridSpec",
    "GridFunction",
    "GeometryFields",
    "derivatives",
    "geometry_fields",
    "interior_speed",
    "divergence_form_speed",
    "tangent_plane_distance",
    "fields_table",
    "MEAN_CONVEXITY_FLOOR",
]

MEAN_CONVEXITY_FLOOR = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid over the box ``[-L, L]^n`` with the origin as a node."""

    n: int
    half_width: float
    dx: float

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.n}")
        if not (self.half_width > 0 and self.dx > 0):
            raise ValueError("half_width and dx must be positive")
        ratio = self.half_width / self.dx
        if abs(ratio - round(ratio)) > 1e-8 * max(1.0, ratio):
            raise ValueError(
                f"half_width {self.half_width} is not a whole number of steps dx={self.dx}"
            )
        if self.nodes_per_axis < 3:
            raise ValueError("grid needs at least 3 nodes per axis")

    @property
    def nodes_per_axis(self) -> int:
        return 2 * int(round(self.half_width / self.dx)) + 1

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nodes_per_axis,) * self.n

    @property
    def axis(self) -> np.ndarray:
        m = self.nodes_per_axis // 2
        return self.dx * np.arange(-m, m + 1, dtype=float)

    @property
    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``(*shape, n)``."""
        axes = [self.axis] * self.n
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    @property
    def interior(self) -> tuple[slice, ...]:
        return (slice(1, -1),) * self.n

    @property
    def origin_index(self) -> tuple[int, ...]:
        return (self.nodes_per_axis // 2,) * self.n

    def index_of(self, x) -> tuple[int, ...]:
        """Index of the node nearest to the point ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.n,):
            raise ValueError(f"point must have {self.n} coordinates")
        idx = np.rint(x / self.dx).astype(int) + self.nodes_per_axis // 2
        if np.any(idx < 0) or np.any(idx >= self.nodes_per_axis):
            raise ValueError(f"point {x} lies outside the grid")
        return tuple(int(i) for i in idx)

    def scaled(self, factor: float) -> "GridSpec":
        return GridSpec(self.n, self.half_width * factor, self.dx * factor)


@dataclass(frozen=True)
class GridFunction:
    """Samples of a height function ``u`` on a :class:`GridSpec` at time ``t``."""

    grid: GridSpec
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(
                f"values have shape {values.shape}, grid expects {self.grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function contains non-finite values")
        if not (self.t >= 0):
            raise ValueError("time must be nonnegative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, f, grid: GridSpec, t: float = 0.0) -> "GridFunction":
        """Sample ``f(x)`` where ``x`` has shape ``(*grid.shape, n)``."""
        return cls(grid, np.asarray(f(grid.coords), dtype=float), t)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def dx(self) -> float:
        return self.grid.dx

    @property
    def half_width(self) -> float:
        return self.grid.half_width

    def with_values(self, values, t: float | None = None) -> "GridFunction":
        return GridFunction(self.grid, values, self.t if t is None else t)

    def restrict(self, half_width: float) -> "GridFunction":
        """Sub-grid over ``[-half_width, half_width]^n`` sharing the same nodes."""
        sub = GridSpec(self.n, half_width, self.dx)
        off = (self.grid.nodes_per_axis - sub.nodes_per_axis) // 2
        if off < 0:
            raise ValueError("restriction window is larger than the grid")
        sl = (slice(off, off + sub.nodes_per_axis),) * self.n
        return GridFunction(sub, self.values[sl], self.t)


def _first_derivative(u: np.ndarray, dx: float, axis: int) -> np.ndarray:
    return np.gradient(u, dx, axis=axis, edge_order=2)


def _second_derivative(u: np.ndarray, dx: float, axis: int) -> np.ndarray:
    u = np.moveaxis(u, axis, 0)
    out = np.empty_like(u)
    out[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / dx**2
    if u.shape[0] >= 4:
        out[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / dx**2
        out[-1] = (2.0 * u[-1] - 5.0 * u[-2] + 4.0 * u[-3] - u[-4]) / dx**2
    else:
        out[0] = out[1]
        out[-1] = out[-2]
    return np.moveaxis(out, 0, axis)


def derivatives(u: GridFunction) -> tuple[np.ndarray, np.ndarray]:
    """Finite-difference gradient and Hessian of ``u``.

    Returns ``(Du, D2u)`` with shapes ``(*shape, n)`` and ``(*shape, n, n)``.
    Both stencils are exact on polynomials of degree at most two. The mixed
    derivative is computed once and stored in both off-diagonal slots.
    """
    vals = np.asarray(u.values)
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite grid values")
    n, dx = u.n, u.dx
    Du = np.stack([_first_derivative(vals, dx, i) for i in range(n)], axis=-1)
    D2u = np.empty(vals.shape + (n, n))
    for i in range(n):
        D2u[..., i, i] = _second_derivative(vals, dx, i)
    if n == 2:
        mixed = _first_derivative(Du[..., 0], dx, 1)
        D2u[..., 0, 1] = mixed
        D2u[..., 1, 0] = mixed
    return Du, D2u


@dataclass
class GeometryFields:
    """Geometric quantities of a sampled graph, one entry per grid node.

    Arrays cover the whole grid; values on boundary nodes come from one-sided
    stencils. ``mask`` marks nodes with ``H`` above the mean-convexity floor;
    ``F`` and ``F_up`` are NaN elsewhere.
    """

    Du: np.ndarray
    D2u: np.ndarray
    W: np.ndarray
    nu: np.ndarray
    g_lo: np.ndarray
    g_up: np.ndarray
    h: np.ndarray
    H: np.ndarray
    K: np.ndarray
    lambdas: np.ndarray
    F: np.ndarray
    F_up: np.ndarray
    mask: np.ndarray
    rho: float
    interior: tuple = field(default=())

    @property
    def v(self) -> np.ndarray:
        # gradient function 1 / <-e_{n+1}, nu> coincides with W for graphs
        return self.W

    @property
    def speed(self) -> np.ndarray:
        """Vertical velocity ``W * H**rho`` (NaN where unmasked)."""
        return self.W * self.F


def _principal_curvatures(Du, h, W):
    n = Du.shape[-1]
    if n == 1:
        # h_11 / g_11
        return (h[..., 0, 0] / W**2)[..., None]
    # symmetric form S = g^{-1/2} h g^{-1/2}; g^{-1/2} = I + (1/W - 1) e e^T
    p2 = np.sum(Du**2, axis=-1)
    safe = np.where(p2 > 0, p2, 1.0)
    coef = np.where(p2 > 0, (1.0 / W - 1.0) / safe, 0.0)
    ginv_half = np.eye(2) + coef[..., None, None] * Du[..., :, None] * Du[..., None, :]
    S = ginv_half @ h @ ginv_half
    a, b, c = S[..., 0, 0], 0.5 * (S[..., 0, 1] + S[..., 1, 0]), S[..., 1, 1]
    mean = 0.5 * (a + c)
    rad = np.hypot(0.5 * (a - c), b)
    return np.stack([mean - rad, mean + rad], axis=-1)


def geometry_fields(
    u: GridFunction, rho: float, floor: float = MEAN_CONVEXITY_FLOOR
) -> GeometryFields:
    """Evaluate every graph quantity at every node of ``u``."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    Du, D2u = derivatives(u)
    n = u.n
    p2 = np.sum(Du**2, axis=-1)
    W2 = 1.0 + p2
    W = np.sqrt(W2)
    eye = np.eye(n)
    outer = Du[..., :, None] * Du[..., None, :]
    g_lo = eye + outer
    g_up = eye - outer / W2[..., None, None]
    h = D2u / W[..., None, None]
    H = np.einsum("...ij,...ij->...", g_up, h)
    K = np.linalg.det(h) / np.linalg.det(g_lo)
    nu = np.concatenate([Du, -np.ones(Du.shape[:-1] + (1,))], axis=-1) / W[..., None]
    lambdas = _principal_curvatures(Du, h, W)
    mask = H > floor
    Hpos = np.where(mask, H, np.nan)
    F = Hpos**rho
    F_up = (rho * Hpos ** (rho - 1.0))[..., None, None] * g_up
    return GeometryFields(
        Du=Du, D2u=D2u, W=W, nu=nu, g_lo=g_lo, g_up=g_up, h=h, H=H, K=K,
        lambdas=lambdas, F=F, F_up=F_up, mask=mask, rho=float(rho),
        interior=u.grid.interior,
    )


def interior_speed(values: np.ndarray, dx: float) -> tuple[np.ndarray, np.ndarray]:
    """``(W, H)`` at interior nodes from central differences only.

    This is the hot loop of the solver, so it avoids building the full
    tensor fields; the arithmetic matches :func:`geometry_fields` there.
    """
    u = values
    if u.ndim == 1:
        ux = (u[2:] - u[:-2]) / (2.0 * dx)
        uxx = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / dx**2
        W2 = 1.0 + ux * ux
        W = np.sqrt(W2)
        return W, uxx / (W2 * W)
    c = u[1:-1, 1:-1]
    ux = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2.0 * dx)
    uy = (u[1:-1, 2:] - u[1:-1, :-2]) / (2.0 * dx)
    uxx = (u[2:, 1:-1] - 2.0 * c + u[:-2, 1:-1]) / dx**2
    uyy = (u[1:-1, 2:] - 2.0 * c + u[1:-1, :-2]) / dx**2
    uxy = (u[2:, 2:] - u[2:, :-2] - u[:-2, 2:] + u[:-2, :-2]) / (4.0 * dx**2)
    W2 = 1.0 + ux * ux + uy * uy
    W = np.sqrt(W2)
    trace = uxx + uyy - (ux * ux * uxx + 2.0 * ux * uy * uxy + uy * uy * uyy) / W2
    return W, trace / W


def divergence_form_speed(
    u: GridFunction,
    rho: float,
    conservative: bool = False,
    floor: float = MEAN_CONVEXITY_FLOOR,
) -> np.ndarray:
    """Right-hand side ``W * div(Du / W)**rho`` of the graphical flow.

    By default the divergence is expanded with the chain rule,
    ``div(Du/W) = (Lap u - u_i u_j u_ij / W^2) / W``, from the same
    derivatives as :func:`geometry_fields`; the two routes then agree to
    rounding. ``conservative=True`` instead differences the flux ``Du/W``
    a second time, which agrees only to O(dx^2).

    Returns NaN wherever the divergence is not above ``floor``.
    """
    Du, D2u = derivatives(u)
    W2 = 1.0 + np.sum(Du**2, axis=-1)
    W = np.sqrt(W2)
    if conservative:
        flux = Du / W[..., None]
        div = sum(_first_derivative(flux[..., i], u.dx, i) for i in range(u.n))
    else:
        lap = np.trace(D2u, axis1=-2, axis2=-1)
        quad = np.einsum("...i,...ij,...j->...", Du, D2u, Du)
        div = (lap - quad / W2) / W
    div = np.where(div > floor, div, np.nan)
    return W * div**rho


def tangent_plane_distance(u: GridFunction, x, x0) -> float:
    """Distance from ``(x0, u(x0))`` to the embedded tangent plane at ``(x, u(x))``.

    ``x`` and ``x0`` are node indices (tuples of ints, or ints when n = 1).
    """
    ix = (x,) if np.isscalar(x) else tuple(x)
    ix0 = (x0,) if np.isscalar(x0) else tuple(x0)
    if ix == ix0:
        raise ValueError("x and x0 must be distinct nodes")
    Du, _ = derivatives(u)
    coords = u.grid.coords
    p = Du[ix]
    W = np.sqrt(1.0 + p @ p)
    rise = u.values[ix0] - u.values[ix] - p @ (coords[ix0] - coords[ix])
    return float(abs(rise) / W)


def fields_table(fields: GeometryFields, grid: GridSpec) -> tuple[list[str], np.ndarray]:
    """Flatten scalar fields into ``(header, rows)`` with one row per node."""
    coords = grid.coords.reshape(-1, grid.n)
    names = ["x1", "x2"][: grid.n]
    cols = [coords[:, i] for i in range(grid.n)]
    for i in range(grid.n):
        names.append(f"Du{i + 1}")
        cols.append(fields.Du[..., i].ravel())
    for key in ("W", "H", "K", "F"):
        names.append(key)
        cols.append(getattr(fields, key).ravel())
    for i in range(grid.n):
        names.append(f"lambda{i + 1}")
        cols.append(fields.lambdas[..., i].ravel())
    names.append("mask")
    cols.append(fields.mask.ravel().astype(float))
    return names, np.column_stack(cols)
