"""Shrinking spheres, sphere barriers and canonical initial data."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect
from scipy.special import logsumexp

from .geometry import GridFunction, GridSpec

__all__ = [
    "SphereVanished",
    "SphereSolution",
    "BarrierSpec",
    "sphere_radius",
    "extinction_time",
    "sphere_cap_graph",
    "barrier_residual",
    "solve_barrier",
    "scenario",
    "SCENARIOS",
]


class SphereVanished(ValueError):
    """Requested time lies beyond the extinction time of the sphere."""


@dataclass(frozen=True)
class SphereSolution:
    """A round sphere moving inward with normal speed ``H**rho``.

    ``c_H`` is the constant in ``H = c_H / r``. All principal curvatures of a
    round n-sphere are ``1/r``, so the default is ``c_H = n``; pass
    ``c_H = n - 1`` to reproduce the alternative radius law.
    """

    center: tuple[float, ...]
    r0: float
    rho: float
    n: int
    c_H: float | None = None

    def __post_init__(self):
        if self.r0 <= 0 or self.rho <= 0:
            raise ValueError("r0 and rho must be positive")
        if len(self.center) != self.n + 1:
            raise ValueError(f"center needs {self.n + 1} coordinates")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.c_H is None:
            object.__setattr__(self, "c_H", float(self.n))
        if self.c_H <= 0:
            raise ValueError("c_H must be positive")

    @classmethod
    def resting_on_origin(cls, r0, rho, n, c_H=None) -> "SphereSolution":
        """Sphere of radius ``r0`` whose south pole touches the origin at t = 0."""
        return cls((0.0,) * n + (float(r0),), r0, rho, n, c_H)

    @property
    def extinction_time(self) -> float:
        return self.r0 ** (self.rho + 1) / ((self.rho + 1) * self.c_H**self.rho)

    def radius(self, t):
        return sphere_radius(self, t)

    def mean_curvature(self, t):
        return self.c_H / sphere_radius(self, t)

    def speed(self, t):
        return self.mean_curvature(t) ** self.rho


def sphere_radius(s: SphereSolution, t):
    """Radius ``(r0**(rho+1) - (rho+1) c_H**rho t)**(1/(rho+1))`` at time ``t``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("time must be nonnegative")
    base = s.r0 ** (s.rho + 1) - (s.rho + 1) * s.c_H**s.rho * t_arr
    # tolerate rounding right at extinction
    tol = 1e-14 * s.r0 ** (s.rho + 1)
    if np.any(base < -tol):
        raise SphereVanished(
            f"sphere vanished at t*={s.extinction_time:.17g}, requested t={np.max(t_arr):.17g}"
        )
    r = np.maximum(base, 0.0) ** (1.0 / (s.rho + 1))
    return float(r) if np.ndim(r) == 0 else r


def extinction_time(s: SphereSolution) -> float:
    return s.extinction_time


def sphere_cap_graph(s: SphereSolution, t: float, grid: GridSpec) -> GridFunction:
    """Lower cap ``u(x) = c_{n+1} - sqrt(r(t)^2 - |x - c'|^2)`` sampled on ``grid``."""
    if grid.n != s.n:
        raise ValueError("grid and sphere dimensions differ")
    r = sphere_radius(s, t)
    c_h = np.asarray(s.center[:-1])
    # farthest grid corner from the horizontal center must project inside the sphere
    reach = np.sqrt(np.sum((np.abs(c_h) + grid.half_width) ** 2))
    if reach >= r:
        raise ValueError(
            f"grid reaches {reach:.6g} from the center, beyond cap radius {r:.6g}"
        )
    d2 = np.sum((grid.coords - c_h) ** 2, axis=-1)
    return GridFunction(grid, s.center[-1] - np.sqrt(r * r - d2), t)


@dataclass(frozen=True)
class BarrierSpec:
    """Barrier sphere of radius ``h + eps/2`` centred at ``(0, h + eps)``."""

    eps: float
    r_eps: float
    T: float
    rho: float
    n: int
    h: float
    c_H: float
    delta: float = field(init=False)
    r_delta: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "delta", self.eps / 2)
        object.__setattr__(self, "r_delta", self.h + self.eps / 2)

    @property
    def sphere(self) -> SphereSolution:
        center = (0.0,) * self.n + (self.h + self.eps,)
        return SphereSolution(center, self.h + self.eps / 2, self.rho, self.n, self.c_H)

    @property
    def relative_residual(self) -> float:
        res = barrier_residual(self.h, self.eps, self.r_eps, self.T, self.rho, self.n, self.c_H)
        return abs(res) / np.hypot(self.h, self.r_eps)


def barrier_residual(h, eps, r_eps, T, rho, n, c_H=None):
    """``r(T) - sqrt(h^2 + r_eps^2)`` for the sphere of radius ``h + eps/2``.

    A sphere that vanishes before ``T`` counts as radius zero.
    """
    c_H = float(n) if c_H is None else c_H
    base = (h + eps / 2) ** (rho + 1) - (rho + 1) * c_H**rho * T
    lhs = max(base, 0.0) ** (1.0 / (rho + 1))
    return lhs - np.hypot(h, r_eps)


def solve_barrier(eps, r_eps, T, rho, n, c_H=None, xtol=1e-12) -> BarrierSpec:
    """Find the barrier height ``h`` by bisection.

    Raises ``ValueError`` when the residual does not change sign on
    ``[eps/2, 1e6 * max(r_eps, T, 1)]``, i.e. ``r_eps`` is too small for
    the horizon ``T``.
    """
    if min(eps, r_eps, rho) <= 0 or T < 0:
        raise ValueError("eps, r_eps, rho must be positive and T nonnegative")
    c_H = float(n) if c_H is None else float(c_H)
    lo, hi = eps / 2, 1e6 * max(r_eps, T, 1.0)
    args = (eps, r_eps, T, rho, n, c_H)
    f_lo, f_hi = barrier_residual(lo, *args), barrier_residual(hi, *args)
    if f_lo == 0.0:
        h = lo
    elif np.sign(f_lo) == np.sign(f_hi):
        raise ValueError("r_eps too small for this horizon: no sign change on the bracket")
    else:
        h = bisect(barrier_residual, lo, hi, args=args, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=400)
    return BarrierSpec(eps, r_eps, T, rho, n, float(h), c_H)


def _paraboloid(grid, a=1.0):
    return a * np.sum(grid.coords**2, axis=-1)


def _smoothed_cone(grid, mu=0.05):
    x = grid.coords
    faces = np.concatenate([x, -x], axis=-1) / mu
    return mu * logsumexp(faces, axis=-1)


def _hemisphere(grid, r0=2.0):
    s = SphereSolution.resting_on_origin(r0, 1.0, grid.n)
    return sphere_cap_graph(s, 0.0, grid).values


SCENARIOS = {
    "paraboloid": (lambda grid: _paraboloid(grid), ()),
    "scaled_paraboloid": (_paraboloid, ("a",)),
    "smoothed_cone": (_smoothed_cone, ("mu",)),
    "hemisphere": (_hemisphere, ("r0",)),
}


def scenario(name: str, grid: GridSpec, **params) -> GridFunction:
    """Canonical initial data by name.

    ``paraboloid`` is ``|x|^2``; ``scaled_paraboloid`` is ``a |x|^2``;
    ``smoothed_cone`` is ``mu * log(sum exp(+-x_i / mu))``, within
    ``mu log(2n)`` of ``max |x_i|``; ``hemisphere`` is the lower cap of the
    sphere of radius ``r0`` resting on the origin.
    """
    try:
        fn, allowed = SCENARIOS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
    extra = set(params) - set(allowed)
    if extra:
        raise ValueError(f"scenario {name!r} does not take {sorted(extra)}")
    for key, val in params.items():
        if not val > 0:
            raise ValueError(f"{key} must be positive")
    return GridFunction(grid, fn(grid, **params), 0.0)
