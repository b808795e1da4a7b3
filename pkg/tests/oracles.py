"""Independent reference implementations used only by the tests."""

import numpy as np


def grid_minimize_2d(f, center, half_width, points=101, levels=6, shrink=8.0):
    """Coarse-to-fine exhaustive lattice search for min f(b0, b1).

    Each level evaluates every point of a ``points x points`` lattice and
    recentres on the best one before shrinking the window.
    """
    c = np.asarray(center, dtype=float)
    h = float(half_width)
    for _ in range(levels):
        g0 = np.linspace(c[0] - h, c[0] + h, points)
        g1 = np.linspace(c[1] - h, c[1] + h, points)
        vals = np.array([[f(np.array([a, b])) for b in g1] for a in g0])
        i, j = np.unravel_index(np.nanargmin(vals), vals.shape)
        c = np.array([g0[i], g1[j]])
        h /= shrink
    return c


def brute_force_ks(x1, w1, x2, w2):
    """max |F1 - F2| over every sample value, each EDF summed from scratch."""
    x1, w1, x2, w2 = (np.asarray(a, dtype=float) for a in (x1, w1, x2, w2))
    best = 0.0
    for q in np.concatenate([x1, x2]):
        f1 = sum(w for v, w in zip(x1, w1) if v <= q) / w1.sum()
        f2 = sum(w for v, w in zip(x2, w2) if v <= q) / w2.sum()
        best = max(best, abs(f1 - f2))
    return best


def gradient_descent_ridge(design, y, w, penalty, iters=200000, tol=1e-14):
    """Plain gradient descent on sum(w r^2)/sum(w) + penalty |slopes|^2."""
    a = np.column_stack([np.ones(len(y)), design])
    wn = w / w.sum()
    pen = np.r_[0.0, np.full(design.shape[1], penalty)]
    h = 2 * (a.T * wn) @ a + 2 * np.diag(pen)
    step = 1.0 / np.linalg.eigvalsh(h).max()
    b = np.zeros(a.shape[1])
    for _ in range(iters):
        g = 2 * a.T @ (wn * (a @ b - y)) + 2 * pen * b
        b -= step * g
        if np.max(np.abs(g)) < tol:
            break
    return b[1:], b[0]


def dense_kernel_ridge(x, y, gamma, lam_std, query):
    """Textbook kernel ridge: alpha = (K + lam I)^-1 y, built with explicit loops."""
    n = len(x)
    k = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            k[i, j] = np.exp(-gamma * np.sum((x[i] - x[j]) ** 2))
    alpha = np.linalg.solve(k + lam_std * np.eye(n), y)
    kq = np.array([[np.exp(-gamma * np.sum((q - r) ** 2)) for r in x] for q in query])
    return kq @ alpha


def cv_exact(weights):
    """Population CV with Python floats."""
    m = sum(weights) / len(weights)
    var = sum((w - m) ** 2 for w in weights) / len(weights)
    return var ** 0.5 / m
