"""Numba kernels for the canonical-selection vector field.

Only the explicit time stepper needs these; everything else stays in plain
numpy.  The field here must match ``laplacian.normalized_laplacian_apply``
(uniform split over tolerance-tied argmax/argmin sets) exactly.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def selection_field(rho, degree, weights, starts, flat, eps_tie):
    """Right-hand side of the heat equation under the uniform-split selection."""
    n = rho.shape[0]
    mu = rho / degree
    scale = 0.0
    for i in range(n):
        a = abs(mu[i])
        if a > scale:
            scale = a
    tol = eps_tie * scale
    out = np.zeros(n)
    m = weights.shape[0]
    for e in range(m):
        lo = starts[e]
        hi = starts[e + 1]
        mx = -1e300
        mn = 1e300
        for idx in range(lo, hi):
            val = mu[flat[idx]]
            if val > mx:
                mx = val
            if val < mn:
                mn = val
        if mx - mn <= tol:
            continue
        ns = 0
        ni = 0
        ssum = 0.0
        isum = 0.0
        for idx in range(lo, hi):
            val = mu[flat[idx]]
            if val >= mx - tol:
                ns += 1
                ssum += val
            if val <= mn + tol:
                ni += 1
                isum += val
        mean_s = ssum / ns
        mean_i = isum / ni
        w = weights[e]
        for idx in range(lo, hi):
            u = flat[idx]
            val = mu[u]
            if val >= mx - tol:
                out[u] -= (w / ns) * (val - mean_i)
            if val <= mn + tol:
                out[u] -= (w / ni) * (val - mean_s)
    return out


@njit(cache=True)
def rk4_integrate(rho0, degree, weights, starts, flat, eps_tie, h, sample_times):
    """Classical RK4 from t=0, landing exactly on each sample time."""
    n = rho0.shape[0]
    k = sample_times.shape[0]
    out = np.empty((k, n))
    rho = rho0.copy()
    t = 0.0
    for si in range(k):
        target = sample_times[si]
        while True:
            gap = target - t
            tolgap = 1e-15 * (target if target > 1.0 else 1.0)
            if gap <= tolgap:
                break
            step = h if h < gap else gap
            k1 = selection_field(rho, degree, weights, starts, flat, eps_tie)
            k2 = selection_field(rho + 0.5 * step * k1, degree, weights, starts, flat, eps_tie)
            k3 = selection_field(rho + 0.5 * step * k2, degree, weights, starts, flat, eps_tie)
            k4 = selection_field(rho + step * k3, degree, weights, starts, flat, eps_tie)
            rho = rho + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += step
        for i in range(n):
            out[si, i] = rho[i]
    return out
