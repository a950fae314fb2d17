"""Compiled Levenberg-Marquardt kernel for the single-point MDS subproblem.

Minimizes ``sum_{i active} (||x - X_i|| - d_i)^2`` over ``x``. The damping
schedule, step acceptance and termination tests are identical to
:func:`mdsfeat.lm.lm_minimize`; the kernel only avoids Python overhead,
which dominates when a fit solves hundreds of thousands of tiny problems.
"""

import numpy as np
from numba import njit

GRADIENT = 0
STEP = 1
MAX_ITER = 2
NONFINITE = 3

# Jacobian direction used when x coincides with an anchor.
COINCIDENT_EPS = 1e-9


@njit(cache=True)
def point_cost(x, anchors, targets, active):
    m = x.shape[0]
    cost = 0.0
    for i in range(anchors.shape[0]):
        if not active[i]:
            continue
        s = 0.0
        for c in range(m):
            diff = x[c] - anchors[i, c]
            s += diff * diff
        r = np.sqrt(s) - targets[i]
        cost += r * r
    return cost


@njit(cache=True)
def _normal_equations(x, anchors, targets, active, jtj, g):
    m = x.shape[0]
    jtj[:, :] = 0.0
    g[:] = 0.0
    row = np.empty(m)
    for i in range(anchors.shape[0]):
        if not active[i]:
            continue
        s = 0.0
        for c in range(m):
            diff = x[c] - anchors[i, c]
            row[c] = diff
            s += diff * diff
        dist = np.sqrt(s)
        r = dist - targets[i]
        if dist == 0.0:
            row[:] = 0.0
            row[0] = 1.0
        else:
            for c in range(m):
                row[c] /= dist
        for a in range(m):
            g[a] += row[a] * r
            for b in range(a + 1):
                jtj[a, b] += row[a] * row[b]
    for a in range(m):
        for b in range(a + 1, m):
            jtj[a, b] = jtj[b, a]


@njit(cache=True)
def _cholesky_solve(a, lam, g, out):
    """Solve (a + lam I) out = -g; returns False if not positive definite."""
    m = a.shape[0]
    low = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1):
            s = a[i, j]
            if i == j:
                s += lam
            for k in range(j):
                s -= low[i, k] * low[j, k]
            if i == j:
                if s <= 0.0 or not np.isfinite(s):
                    return False
                low[i, i] = np.sqrt(s)
            else:
                low[i, j] = s / low[j, j]
    y = np.empty(m)
    for i in range(m):
        s = -g[i]
        for k in range(i):
            s -= low[i, k] * y[k]
        y[i] = s / low[i, i]
    for i in range(m - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, m):
            s -= low[k, i] * out[k]
        out[i] = s / low[i, i]
    return True


@njit(cache=True)
def solve_point(x0, anchors, targets, active, lam0, up, down, max_iter, gtol, xtol):
    """Returns (x, cost, iterations, reason)."""
    m = x0.shape[0]
    x = x0.copy()
    cost = point_cost(x, anchors, targets, active)
    lam = lam0
    jtj = np.empty((m, m))
    g = np.empty(m)
    step = np.empty(m)
    x_new = np.empty(m)
    need_jac = True
    reason = MAX_ITER
    it = 0
    while it < max_iter:
        if need_jac:
            _normal_equations(x, anchors, targets, active, jtj, g)
            need_jac = False
            gmax = 0.0
            for c in range(m):
                if abs(g[c]) > gmax:
                    gmax = abs(g[c])
            if not np.isfinite(gmax):
                return x, cost, it, NONFINITE
            if gmax < gtol:
                reason = GRADIENT
                break
        it += 1
        tries = 0
        while not _cholesky_solve(jtj, lam, g, step):
            lam *= up
            tries += 1
            if tries > 60:
                return x, cost, it, NONFINITE
        snorm = 0.0
        xnorm = 0.0
        for c in range(m):
            snorm += step[c] * step[c]
            xnorm += x[c] * x[c]
        if np.sqrt(snorm) <= xtol * (np.sqrt(xnorm) + xtol):
            reason = STEP
            break
        for c in range(m):
            x_new[c] = x[c] + step[c]
        cost_new = point_cost(x_new, anchors, targets, active)
        if not np.isfinite(cost_new):
            return x, cost, it, NONFINITE
        if cost_new < cost:
            x[:] = x_new
            cost = cost_new
            lam /= down
            need_jac = True
        else:
            lam *= up
    return x, cost, it, reason
