"""Independent reference computations used by the tests.

Nothing here calls the package's own prox or solver code.
"""

import numpy as np
from scipy.optimize import linprog


def grid_argmin_1d(f, lo, hi, step=1e-4):
    xs = np.arange(lo, hi + step, step)
    vals = f(xs)
    i = int(np.argmin(vals))
    return xs[i], vals[i]


def grid_argmin_2d(f, center, radius, step):
    ax = np.arange(-radius, radius + step / 2, step)
    X0, X1 = np.meshgrid(center[0] + ax, center[1] + ax, indexing="ij")
    vals = f(X0, X1)
    i, j = np.unravel_index(int(np.argmin(vals)), vals.shape)
    edge = i in (0, len(ax) - 1) or j in (0, len(ax) - 1)
    return np.array([X0[i, j], X1[i, j]]), vals[i, j], edge


def grid_argmin_2d_refined(f, v, final_step=1e-4):
    """Coarse-to-fine dense grid search; the last level has spacing ``final_step``.

    The prox minimizer lies within ``||v||`` of ``v`` because 0 is feasible
    and the penalty is nonnegative, so the first level covers that ball.
    """
    r = float(np.linalg.norm(v)) + 0.05
    x, _, _ = grid_argmin_2d(f, v, r, 0.02)
    x, _, edge1 = grid_argmin_2d(f, x, 0.3, 2e-3)
    x, val, edge2 = grid_argmin_2d(f, x, 1e-2, final_step)
    return x, val, edge1 or edge2


def check_loss(u, tau):
    return np.where(u < 0, (tau - 1.0) * u, tau * u)


def prox_check_objective(v, sigma, tau):
    return lambda x: sigma * check_loss(x, tau) + 0.5 * (x - v) ** 2


def block_prox_objective(v, lam, alpha, w, vl, step):
    """``step * penalty(x) + 0.5 ||x - v||^2`` for one group of size 1 or 2."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    sq = np.sqrt(v.size)
    if v.size == 1:
        return lambda x: (step * lam * (alpha * w[0] * np.abs(x) + (1 - alpha) * sq * vl * np.abs(x))
                          + 0.5 * (x - v[0]) ** 2)
    return lambda a, b: (step * lam * (alpha * (w[0] * np.abs(a) + w[1] * np.abs(b))
                                       + (1 - alpha) * sq * vl * np.sqrt(a * a + b * b))
                         + 0.5 * ((a - v[0]) ** 2 + (b - v[1]) ** 2))


def lp_weighted_l1_qr(X, y, tau, l1):
    """Optimal value and coefficients of ``mean check(y - Xb) + sum l1_j |b_j|`` by LP."""
    n, p = X.shape
    # variables: b+ (p), b- (p), u+ (n), u- (n)
    c = np.concatenate([l1, l1, np.full(n, tau / n), np.full(n, (1 - tau) / n)])
    A = np.hstack([X, -X, np.eye(n), -np.eye(n)])
    res = linprog(c, A_eq=A, b_eq=y, bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(res.message)
    b = res.x[:p] - res.x[p:2 * p]
    return float(res.fun), b
