"""Independent reference solvers used by the reconstruction tests."""

from __future__ import annotations

import numpy as np

from wdntsp.recon import g_value_grad


def fd_gradient(p, B1, C, alpha, d, h=1e-6):
    """Central finite differences of the conservation penalty."""
    p = np.asarray(p, dtype=float)
    out = np.empty_like(p)
    for i in range(p.shape[0]):
        e = np.zeros_like(p)
        e[i] = h
        out[i] = (g_value_grad(p + e, B1, C, alpha, d)[0]
                  - g_value_grad(p - e, B1, C, alpha, d)[0]) / (2 * h)
    return out


def projected_gradient_flow(W, y, B1, d, beta, tol=1e-10, max_iter=500_000):
    """Minimise ``||W f - y||^2 + beta ||B1 f - d||^2`` over ``f >= 0``.

    Accelerated projected gradient with adaptive restart, stopped when the
    projected-gradient residual falls below ``tol``.
    """
    A = np.vstack([W, np.sqrt(beta) * B1])
    b = np.concatenate([y, np.sqrt(beta) * d])
    H = A.T @ A
    g0 = A.T @ b
    step = 1.0 / np.linalg.eigvalsh(H)[-1]
    f = np.zeros(W.shape[1])
    z, t = f.copy(), 1.0
    for _ in range(max_iter):
        f_new = np.maximum(z - step * (H @ z - g0), 0.0)
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        if (f_new - f) @ (z - f_new) > 0:  # restart when momentum goes uphill
            z, t = f_new.copy(), 1.0
        else:
            z = f_new + (t - 1) / t_new * (f_new - f)
            t = t_new
        f = f_new
        grad = H @ f - g0
        if np.max(np.abs(f - np.maximum(f - grad, 0.0))) <= tol:
            return f
    raise RuntimeError("projected gradient oracle did not converge")


def grid_minimise_2d(fun, lo, hi, levels=8, points=81):
    """Nested grid search for a 2-D box-constrained minimiser."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    best = None
    for _ in range(levels):
        xs = np.linspace(lo[0], hi[0], points)
        ys = np.linspace(lo[1], hi[1], points)
        vals = np.array([[fun(np.array([a, b])) for b in ys] for a in xs])
        i, j = np.unravel_index(np.argmin(vals), vals.shape)
        best = np.array([xs[i], ys[j]])
        span = (hi - lo) / (points - 1) * 4
        lo = np.maximum(best - span, 0.0)
        hi = best + span
    return best
