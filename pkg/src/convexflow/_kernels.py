"""Compiled inner loops for the explicit stepper.

One pass over the interior fills the mean curvature ``H`` and the vertical
speed ``S = W H^rho`` and returns the reductions the stepper needs::

    (min H, flat index of min H, max H, max W, max S, max rho S / H)

The last entry is the largest diffusion coefficient ``W rho H^(rho-1)``.
Loops run serially in a fixed order, so every reduction is reproducible.
"""

import numba
import numpy as np


@numba.njit(cache=True, inline="always")
def _power(h, rho):
    if rho == 1.0:
        return h
    if rho == 2.0:
        return h * h
    if rho == 0.5:
        return np.sqrt(h)
    return h**rho


@numba.njit(cache=True)
def speed_terms_1d(u, dx, rho, S, H):
    inv2 = 1.0 / (2.0 * dx)
    invsq = 1.0 / (dx * dx)
    hmin, hmax, wmax, smax, cmax = np.inf, -np.inf, 0.0, 0.0, 0.0
    imin = 0
    for i in range(1, u.shape[0] - 1):
        ux = (u[i + 1] - u[i - 1]) * inv2
        uxx = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * invsq
        W2 = 1.0 + ux * ux
        w = np.sqrt(W2)
        hh = uxx / (W2 * w)
        H[i - 1] = hh
        if not hh >= hmin:
            hmin = hh
            imin = i - 1
        hmax = max(hmax, hh)
        wmax = max(wmax, w)
        if hh > 0.0:
            s = w * _power(hh, rho)
            S[i - 1] = s
            smax = max(smax, s)
            cmax = max(cmax, rho * s / hh)
        else:
            S[i - 1] = np.nan
    return hmin, imin, hmax, wmax, smax, cmax


@numba.njit(cache=True)
def speed_terms_2d(u, dx, rho, S, H):
    m0, m1 = u.shape
    inv2 = 1.0 / (2.0 * dx)
    invsq = 1.0 / (dx * dx)
    inv4 = 0.25 * invsq
    hmin, hmax, wmax, smax, cmax = np.inf, -np.inf, 0.0, 0.0, 0.0
    imin = 0
    for i in range(1, m0 - 1):
        for j in range(1, m1 - 1):
            c = u[i, j]
            ux = (u[i + 1, j] - u[i - 1, j]) * inv2
            uy = (u[i, j + 1] - u[i, j - 1]) * inv2
            uxx = (u[i + 1, j] - 2.0 * c + u[i - 1, j]) * invsq
            uyy = (u[i, j + 1] - 2.0 * c + u[i, j - 1]) * invsq
            uxy = (u[i + 1, j + 1] - u[i + 1, j - 1] - u[i - 1, j + 1] + u[i - 1, j - 1]) * inv4
            W2 = 1.0 + ux * ux + uy * uy
            w = np.sqrt(W2)
            hh = (uxx + uyy - (ux * ux * uxx + 2.0 * ux * uy * uxy + uy * uy * uyy) / W2) / w
            H[i - 1, j - 1] = hh
            if not hh >= hmin:
                hmin = hh
                imin = (i - 1) * (m1 - 2) + (j - 1)
            hmax = max(hmax, hh)
            wmax = max(wmax, w)
            if hh > 0.0:
                s = w * _power(hh, rho)
                S[i - 1, j - 1] = s
                smax = max(smax, s)
                cmax = max(cmax, rho * s / hh)
            else:
                S[i - 1, j - 1] = np.nan
    return hmin, imin, hmax, wmax, smax, cmax


def speed_terms(u, dx, rho, S, H):
    if u.ndim == 1:
        return speed_terms_1d(u, dx, rho, S, H)
    return speed_terms_2d(u, dx, rho, S, H)
