"""Weighted covariate-balance diagnostics: SMD, K-S, ECDF traces and
percentile intervals across replications."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .data import WeightVector
from .errors import (
    DegenerateWeightsError,
    EmptyGroupError,
    InsufficientReplicationsError,
    ZeroPooledVarianceError,
    ZeroWeightError,
)

SMD_THRESHOLD = 10.0


def _arrays(values, weights):
    x = np.asarray(values, dtype=float)
    if weights is None:
        w = np.ones_like(x)
    else:
        w = np.asarray(weights.weights if isinstance(weights, WeightVector) else weights, dtype=float)
    if x.shape != w.shape:
        raise ValueError(f"values {x.shape} vs weights {w.shape}")
    return x, w


def weighted_mean(values, weights=None) -> float:
    x, w = _arrays(values, weights)
    total = w.sum()
    if not total > 0:
        raise ZeroWeightError("total weight must be positive")
    return float(w @ x / total)


def weighted_variance(values, weights=None) -> float:
    """Reliability-weighted variance ``S / (S^2 - S2) * sum w (x - m)^2``.

    Reduces to the (n - 1) sample variance for unit weights.
    """
    x, w = _arrays(values, weights)
    s = w.sum()
    denom = s * s - (w * w).sum()
    if not denom > 0:
        raise DegenerateWeightsError("(sum w)^2 <= sum w^2; need two or more weighted samples")
    m = w @ x / s
    return float(s / denom * (w @ (x - m) ** 2))


def smd(treated_values, treated_weights, control_values, control_weights) -> float:
    """Signed standardised mean difference in percent of the pooled SD."""
    var_t = weighted_variance(treated_values, treated_weights)
    var_c = weighted_variance(control_values, control_weights)
    pooled = np.sqrt((var_t + var_c) / 2.0)
    if not pooled > 0:
        raise ZeroPooledVarianceError("pooled variance is zero")
    diff = weighted_mean(treated_values, treated_weights) - weighted_mean(control_values, control_weights)
    return float(100.0 * diff / pooled)


def weighted_ecdf(values, weights=None):
    """Right-continuous weighted ECDF at each distinct sorted value.

    Returns ``(value, cumulative)`` arrays; the final cumulative entry is
    exactly 1.
    """
    x, w = _arrays(values, weights)
    total = w.sum()
    if not total > 0:
        raise ZeroWeightError("total weight must be positive")
    order = np.argsort(x, kind="stable")
    xs, ws = x[order], w[order]
    uniq, start = np.unique(xs, return_index=True)
    csum = np.cumsum(ws)
    ends = np.r_[start[1:], len(xs)] - 1
    cum = csum[ends] / total
    cum[-1] = 1.0
    return uniq, cum


def ecdf_at(trace, query):
    """Evaluate an ECDF trace (from ``weighted_ecdf``) at ``query`` points."""
    values, cum = trace
    idx = np.searchsorted(values, np.asarray(query, dtype=float), side="right")
    return np.concatenate([[0.0], cum])[idx]


def ks_statistic(treated_values, treated_weights, control_values, control_weights) -> float:
    """sup_x |F_T(x) - F_C(x)| between two weighted empirical distributions.

    Both EDFs are step functions that jump only at sample values, so the
    supremum is attained on the pooled distinct values; the sweep visits
    exactly those.
    """
    x1, w1 = _arrays(treated_values, treated_weights)
    x2, w2 = _arrays(control_values, control_weights)
    if x1.size == 0 or x2.size == 0:
        raise EmptyGroupError("both groups need at least one sample")
    if not (w1.sum() > 0 and w2.sum() > 0):
        raise EmptyGroupError("both groups need positive total weight")
    o1 = np.argsort(x1, kind="stable")
    o2 = np.argsort(x2, kind="stable")
    return _kernels.ks_sorted(x1[o1], w1[o1], x2[o2], w2[o2])


def replication_ci(values, level: float = 0.95):
    """Mean and percentile interval across replications.

    Bounds are the empirical ``(1 - level)/2`` and ``(1 + level)/2``
    quantiles with linear interpolation between order statistics.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise InsufficientReplicationsError("need at least two replications")
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(v, [tail, 1.0 - tail], method="linear")
    point = float(v.mean())
    # the mean of identical floats can drift by an ulp outside [lo, hi]
    point = min(max(point, float(lo)), float(hi))
    return float(lo), point, float(hi)


@dataclass
class BalanceReport:
    """Per-covariate balance for one weighting of one sample."""

    features: tuple[str, ...]
    smd_unweighted: np.ndarray
    smd_weighted: np.ndarray
    ks_unweighted: np.ndarray
    ks_weighted: np.ndarray
    ecdf_traces: dict = field(default_factory=dict)  # (feature, group) -> (values, cumulative)

    def worst_abs_smd(self) -> float:
        return float(np.max(np.abs(self.smd_weighted)))


def balance_report(covariates, treatment, weights, features=None, with_traces: bool = True) -> BalanceReport:
    """SMD (raw and weighted), K-S and ECDF traces for every covariate."""
    x = np.asarray(covariates, dtype=float)
    t = np.asarray(treatment)
    _, w = _arrays(t.astype(float), weights)
    if features is None:
        features = tuple(f"x{j + 1}" for j in range(x.shape[1]))
    tr, co = t == 1, t == 0
    if not tr.any() or not co.any():
        raise EmptyGroupError("both treatment arms are needed for balance diagnostics")
    k = x.shape[1]
    smd_raw, smd_w, ks_raw, ks_w = (np.empty(k) for _ in range(4))
    traces = {}
    for j in range(k):
        col = x[:, j]
        smd_raw[j] = smd(col[tr], None, col[co], None)
        smd_w[j] = smd(col[tr], w[tr], col[co], w[co])
        ks_raw[j] = ks_statistic(col[tr], None, col[co], None)
        ks_w[j] = ks_statistic(col[tr], w[tr], col[co], w[co])
        if with_traces:
            traces[(features[j], "treated")] = weighted_ecdf(col[tr], w[tr])
            traces[(features[j], "control")] = weighted_ecdf(col[co], w[co])
    return BalanceReport(tuple(features), smd_raw, smd_w, ks_raw, ks_w, traces)
