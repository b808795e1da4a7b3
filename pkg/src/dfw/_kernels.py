"""Hot numeric loops, each with a numba and a pure-numpy implementation.

The numba path is used when numba imports cleanly and the environment
variable ``DFW_DISABLE_NUMBA`` is unset (or ``0``). ``set_backend`` switches
at runtime; the benchmark and the backend-equivalence tests rely on it.
"""

import os

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


_backend = "numba" if NUMBA_AVAILABLE and os.environ.get("DFW_DISABLE_NUMBA", "0") in ("", "0") else "numpy"


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError("numba is not installed")
    _backend = name


# --------------------------------------------------------------------------
# coefficient of variation over enumerated propensity tuples
# --------------------------------------------------------------------------

@njit(cache=True)
def _cv_row(w):
    n = w.shape[0]
    mu = 0.0
    for i in range(n):
        mu += w[i]
    mu /= n
    ss = 0.0
    for i in range(n):
        d = w[i] - mu
        ss += d * d
    return np.sqrt(ss / n) / mu


@njit(cache=True)
def _cv_rows_numba(p):
    m, k = p.shape
    cv_dfw = np.empty(m)
    cv_ipw = np.empty(m)
    wd = np.empty(k)
    wi = np.empty(k)
    for r in range(m):
        for j in range(k):
            wd[j] = 1.0 - p[r, j]
            wi[j] = 1.0 / p[r, j]
        cv_dfw[r] = _cv_row(wd)
        cv_ipw[r] = _cv_row(wi)
    return cv_dfw, cv_ipw


def _cv_rows_numpy(p):
    def cv(w):
        mu = w.mean(axis=1)
        return np.sqrt(((w - mu[:, None]) ** 2).mean(axis=1)) / mu

    return cv(1.0 - p), cv(1.0 / p)


@njit(cache=True)
def _cv_tuples_numba(levels, size):
    nl = levels.shape[0]
    total = nl ** size
    cv_dfw = np.empty(total)
    cv_ipw = np.empty(total)
    digits = np.zeros(size, dtype=np.int64)
    wd = np.empty(size)
    wi = np.empty(size)
    for r in range(total):
        for j in range(size):
            p = levels[digits[j]]
            wd[j] = 1.0 - p
            wi[j] = 1.0 / p
        cv_dfw[r] = _cv_row(wd)
        cv_ipw[r] = _cv_row(wi)
        # odometer increment, last position fastest (itertools.product order)
        j = size - 1
        while j >= 0:
            digits[j] += 1
            if digits[j] < nl:
                break
            digits[j] = 0
            j -= 1
    return cv_dfw, cv_ipw


def _tuple_matrix(levels, size):
    idx = np.indices((len(levels),) * size).reshape(size, -1).T
    return levels[idx]


def cv_rows(p):
    """Per-row CV of DFW weights (1 - p) and IPW weights (1 / p)."""
    p = np.ascontiguousarray(p, dtype=float)
    if _backend == "numba":
        return _cv_rows_numba(p)
    return _cv_rows_numpy(p)


def cv_tuples(levels, size):
    """CV pairs for every ordered ``size``-tuple over ``levels``.

    Rows come in ``itertools.product`` order.
    """
    levels = np.ascontiguousarray(levels, dtype=float)
    if _backend == "numba":
        return _cv_tuples_numba(levels, int(size))
    return _cv_rows_numpy(_tuple_matrix(levels, int(size)))


# --------------------------------------------------------------------------
# weighted two-sample K-S supremum
# --------------------------------------------------------------------------

@njit(cache=True)
def _ks_sorted_numba(x1, w1, x2, w2):
    n1 = x1.shape[0]
    n2 = x2.shape[0]
    s1 = 0.0
    for i in range(n1):
        s1 += w1[i]
    s2 = 0.0
    for i in range(n2):
        s2 += w2[i]
    i = 0
    j = 0
    c1 = 0.0
    c2 = 0.0
    best = 0.0
    while i < n1 or j < n2:
        if j >= n2 or (i < n1 and x1[i] <= x2[j]):
            v = x1[i]
        else:
            v = x2[j]
        # absorb every observation tied at v in both samples
        while i < n1 and x1[i] == v:
            c1 += w1[i]
            i += 1
        while j < n2 and x2[j] == v:
            c2 += w2[j]
            j += 1
        f1 = c1 / s1 if i < n1 else 1.0
        f2 = c2 / s2 if j < n2 else 1.0
        d = abs(f1 - f2)
        if d > best:
            best = d
    return best


def _ks_sorted_numpy(x1, w1, x2, w2):
    c1 = np.cumsum(w1) / w1.sum()
    c2 = np.cumsum(w2) / w2.sum()
    c1[-1] = 1.0
    c2[-1] = 1.0
    grid = np.union1d(x1, x2)
    f1 = np.concatenate([[0.0], c1])[np.searchsorted(x1, grid, side="right")]
    f2 = np.concatenate([[0.0], c2])[np.searchsorted(x2, grid, side="right")]
    return float(np.abs(f1 - f2).max())


def ks_sorted(x1, w1, x2, w2):
    """Sup |F1 - F2| for weighted samples already sorted by value."""
    args = [np.ascontiguousarray(a, dtype=float) for a in (x1, w1, x2, w2)]
    if _backend == "numba":
        return float(_ks_sorted_numba(*args))
    return _ks_sorted_numpy(*args)


# --------------------------------------------------------------------------
# RBF Gram matrix
# --------------------------------------------------------------------------

@njit(cache=True)
def _rbf_numba(a, b, gamma):
    n, d = a.shape
    m = b.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for k in range(d):
                diff = a[i, k] - b[j, k]
                s += diff * diff
            out[i, j] = np.exp(-gamma * s)
    return out


def _rbf_numpy(a, b, gamma):
    # explicit differences rather than the |a|^2 + |b|^2 - 2ab expansion,
    # which loses digits for near-duplicate rows
    sq = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-gamma * sq)


def rbf_gram(a, b, gamma):
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    if _backend == "numba":
        return _rbf_numba(a, b, float(gamma))
    return _rbf_numpy(a, b, float(gamma))
