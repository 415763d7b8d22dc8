"""Optional numba-accelerated hot loops.

The nested dual iteration on tiny grids is dominated by per-call numpy
overhead, so the TV variant (the one run for thousands of inner
iterations) gets a compiled kernel when numba is importable.  The
numpy fallback in ``solvers`` computes the same recurrence.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(f):
            return f

        return deco(args[0]) if args and callable(args[0]) else deco


@njit(cache=True)
def tv_dual_loop(a, v0, alpha, boa, lam, k_max):  # pragma: no cover - jitted
    """Nested dual iteration for isotropic TV, no metric.

    Returns (ergodic average of the primal points 1..k_max, last primal
    point, final dual field).
    """
    h, w = a.shape
    vx = v0[0].copy()
    vy = v0[1].copy()
    acc = np.zeros((h, w))
    u = np.empty((h, w))
    for k in range(k_max):
        for i in range(h):
            for j in range(w):
                jm = j - 1 if j > 0 else w - 1
                im = i - 1 if i > 0 else h - 1
                wt = (vx[i, jm] - vx[i, j]) + (vy[im, j] - vy[i, j])
                u[i, j] = a[i, j] - alpha * wt
        if k > 0:
            for i in range(h):
                for j in range(w):
                    acc[i, j] += u[i, j]
        for i in range(h):
            for j in range(w):
                jp = j + 1 if j < w - 1 else 0
                ip = i + 1 if i < h - 1 else 0
                gx = vx[i, j] + boa * (u[i, jp] - u[i, j])
                gy = vy[i, j] + boa * (u[ip, j] - u[i, j])
                mag = np.sqrt(gx * gx + gy * gy)
                f = lam / max(lam, mag)
                vx[i, j] = gx * f
                vy[i, j] = gy * f
    for i in range(h):
        for j in range(w):
            jm = j - 1 if j > 0 else w - 1
            im = i - 1 if i > 0 else h - 1
            wt = (vx[i, jm] - vx[i, j]) + (vy[im, j] - vy[i, j])
            u[i, j] = a[i, j] - alpha * wt
            acc[i, j] += u[i, j]
    out_v = np.empty((2, h, w))
    out_v[0] = vx
    out_v[1] = vy
    return acc / k_max, u.copy(), out_v
