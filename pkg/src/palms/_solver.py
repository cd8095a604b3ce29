"""Low-level dual solver: sequential two-variable ascent on the box-constrained QP.

Working pairs are chosen by first-order violation for i and second-order gain
for j; zero-curvature directions (duplicate points) step straight to a bound.
The loop is deliberately branch-simple so numba can compile it; without numba
the same function runs as plain Python.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


@njit(cache=True)
def solve_dual(K, y, C, tol, eps, max_updates):
    """Maximize sum(a) - 0.5 a'(yy'K)a over 0 <= a <= C, sum(a*y) = 0.

    K is the full kernel matrix, y is +-1. Returns (alpha, grad, updates, gap)
    where grad is the dual gradient at the solution and gap the final
    first-order KKT violation (converged when gap <= tol).
    """
    n = y.shape[0]
    alpha = np.zeros(n)
    g = np.ones(n)
    updates = 0
    gap = np.inf
    while updates < max_updates:
        # most violating ascent index i, and the first-order gap for stopping
        i = -1
        crit_i = -np.inf
        m_low = np.inf
        for k in range(n):
            yg = y[k] * g[k]
            if ((y[k] > 0.0 and alpha[k] < C) or (y[k] < 0.0 and alpha[k] > 0.0)) and yg > crit_i:
                crit_i = yg
                i = k
            if ((y[k] > 0.0 and alpha[k] > 0.0) or (y[k] < 0.0 and alpha[k] < C)) and yg < m_low:
                m_low = yg
        gap = crit_i - m_low
        if gap <= tol:
            break
        # partner j maximizing the one-step objective gain
        j = -1
        best_gain = -np.inf
        for k in range(n):
            yg = y[k] * g[k]
            if ((y[k] > 0.0 and alpha[k] > 0.0) or (y[k] < 0.0 and alpha[k] < C)) and yg < crit_i:
                diff = crit_i - yg
                curv = K[i, i] + K[k, k] - 2.0 * K[i, k]
                if curv < eps:
                    curv = eps
                gain = diff * diff / curv
                if gain > best_gain:
                    best_gain = gain
                    j = k
        crit_j = y[j] * g[j]
        # step size along the feasible direction, clipped to the box
        gap_i = (C - alpha[i]) if y[i] > 0.0 else alpha[i]
        gap_j = alpha[j] if y[j] > 0.0 else (C - alpha[j])
        curv = K[i, i] + K[j, j] - 2.0 * K[i, j]
        lam = (crit_i - crit_j) / curv if curv > eps else np.inf
        if gap_i < lam:
            lam = gap_i
        if gap_j < lam:
            lam = gap_j
        # land exactly on a bound when the clip binds (keeps bound tests exact)
        if lam == gap_i:
            alpha[i] = C if y[i] > 0.0 else 0.0
        else:
            alpha[i] += y[i] * lam
        if lam == gap_j:
            alpha[j] = 0.0 if y[j] > 0.0 else C
        else:
            alpha[j] -= y[j] * lam
        for k in range(n):
            g[k] += lam * y[k] * (K[j, k] - K[i, k])
        updates += 1
    return alpha, g, updates, gap
