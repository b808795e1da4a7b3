"""Weighted outcome regressions over ``[x, t]`` (single-model S-learner).

Both models minimise the weight-normalised loss
``sum_i w_i l_i / sum_i w_i`` plus a penalty. Multiplying every weight by a
constant, splitting a row into copies that share its weight, or appending
rows of zero weight all leave the fit unchanged. Penalties therefore live
on the scale of a mean loss: ``lam`` here equals ``n * lam`` in an
unnormalised fit over ``n`` rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _kernels
from .data import WeightVector
from .errors import DimensionMismatchError, IllConditionedError, SingularSystemError, ZeroWeightError


@dataclass(frozen=True)
class RidgeConfig:
    penalty: float = 1e-3
    include_intercept: bool = True

    def __post_init__(self):
        if not (np.isfinite(self.penalty) and self.penalty >= 0):
            raise ValueError("ridge penalty must be finite and non-negative")


@dataclass(frozen=True)
class KernelRidgeConfig:
    """``rbf_bandwidth=None`` means ``1 / d`` for d input columns."""

    penalty: float = 1e-6
    rbf_bandwidth: float | None = None
    median_heuristic: bool = False

    def __post_init__(self):
        if not self.penalty > 0:
            raise ValueError("kernel ridge penalty must be positive")
        if self.rbf_bandwidth is not None and not self.rbf_bandwidth > 0:
            raise ValueError("rbf bandwidth must be positive")


def _normalized(weights, n):
    w = np.asarray(weights.weights if isinstance(weights, WeightVector) else weights, dtype=float)
    if w.shape != (n,):
        raise DimensionMismatchError(f"{w.shape[0]} weights for {n} rows")
    if (w < 0).any() or not np.isfinite(w).all():
        raise ValueError("weights must be finite and non-negative")
    total = w.sum()
    if not total > 0:
        raise ZeroWeightError("total weight is zero")
    return w / total


@dataclass(frozen=True)
class LinearModel:
    coefficients: np.ndarray  # slopes, treatment column last
    intercept: float

    def predict(self, design) -> np.ndarray:
        design = np.asarray(design, dtype=float)
        if design.shape[1] != len(self.coefficients):
            raise DimensionMismatchError(
                f"model has {len(self.coefficients)} inputs, got {design.shape[1]}")
        return design @ self.coefficients + self.intercept


@dataclass(frozen=True)
class KernelModel:
    train_rows: np.ndarray
    dual_coefficients: np.ndarray
    gamma: float

    def predict(self, design) -> np.ndarray:
        design = np.asarray(design, dtype=float)
        if design.shape[1] != self.train_rows.shape[1]:
            raise DimensionMismatchError(
                f"model has {self.train_rows.shape[1]} inputs, got {design.shape[1]}")
        return _kernels.rbf_gram(design, self.train_rows, self.gamma) @ self.dual_coefficients


def ridge_objective(coefficients, intercept, design, outcome, weights, penalty):
    """Weight-normalised squared loss plus ``penalty * |coefficients|^2``."""
    design = np.asarray(design, dtype=float)
    w = _normalized(weights, design.shape[0])
    r = np.asarray(outcome, dtype=float) - design @ coefficients - intercept
    return float(w @ (r * r) + penalty * coefficients @ coefficients)


def fit_weighted_ridge(design, outcome, weights, config: RidgeConfig = RidgeConfig()) -> LinearModel:
    """Closed-form weighted ridge: ``(A^T W A + lam J) b = A^T W y``.

    ``A`` carries a leading column of ones when an intercept is requested;
    ``J`` is the identity with the intercept entry zeroed, so the intercept
    is never shrunk.
    """
    x = np.asarray(design, dtype=float)
    y = np.asarray(outcome, dtype=float)
    n = x.shape[0]
    if y.shape != (n,):
        raise DimensionMismatchError(f"{y.shape[0]} outcomes for {n} rows")
    w = _normalized(weights, n)
    if config.include_intercept:
        a = np.column_stack([np.ones(n), x])
        pen = np.r_[0.0, np.full(x.shape[1], config.penalty)]
    else:
        a = x
        pen = np.full(x.shape[1], config.penalty)
    if config.penalty == 0 and np.linalg.matrix_rank(a * np.sqrt(w)[:, None]) < a.shape[1]:
        raise SingularSystemError("design is rank deficient and the penalty is zero")
    lhs = a.T @ (a * w[:, None]) + np.diag(pen)
    rhs = a.T @ (w * y)
    try:
        beta = scipy.linalg.solve(lhs, rhs, assume_a="sym")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SingularSystemError("weighted normal equations are singular") from exc
    if config.include_intercept:
        return LinearModel(beta[1:], float(beta[0]))
    return LinearModel(beta, 0.0)


def median_bandwidth(rows) -> float:
    """``1 / median`` of the pairwise squared distances between distinct rows."""
    rows = np.asarray(rows, dtype=float)
    d = ((rows[:, None, :] - rows[None, :, :]) ** 2).sum(axis=2)
    iu = np.triu_indices(len(rows), k=1)
    med = np.median(d[iu])
    return 1.0 / med if med > 0 else 1.0


def fit_weighted_kernel_ridge(covariates_with_t, outcome, weights,
                              config: KernelRidgeConfig = KernelRidgeConfig()) -> KernelModel:
    """Weighted RBF kernel ridge.

    Minimises ``sum_i w_i (y_i - f(x_i))^2 + lam |f|_H^2``; the dual
    coefficients solve ``(K + lam W^-1) alpha = y`` with ``W`` the
    normalised weights. The solve goes through
    the symmetric form ``(W^1/2 K W^1/2 + lam I) b = W^1/2 y`` with
    ``alpha = W^1/2 b`` so zero-ish weights stay harmless.
    """
    x = np.asarray(covariates_with_t, dtype=float)
    y = np.asarray(outcome, dtype=float)
    n = x.shape[0]
    if y.shape != (n,):
        raise DimensionMismatchError(f"{y.shape[0]} outcomes for {n} rows")
    w = _normalized(weights, n)
    if config.median_heuristic:
        gamma = median_bandwidth(x)
    elif config.rbf_bandwidth is not None:
        gamma = config.rbf_bandwidth
    else:
        gamma = 1.0 / x.shape[1]
    k = _kernels.rbf_gram(x, x, gamma)
    s = np.sqrt(w)
    system = k * s[:, None] * s[None, :]
    system[np.diag_indices(n)] += config.penalty
    try:
        b = scipy.linalg.cho_solve(scipy.linalg.cho_factor(system, lower=True), s * y)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise IllConditionedError("kernel ridge system is not positive definite") from exc
    alpha = s * b
    if not np.isfinite(alpha).all():
        raise IllConditionedError("kernel ridge solve produced non-finite coefficients")
    return KernelModel(x.copy(), alpha, float(gamma))


def predict_potential_outcomes(model, covariates):
    """Evaluate ``model`` with the treatment column forced to 0 and to 1."""
    x = np.asarray(covariates, dtype=float)
    m = x.shape[0]
    y0 = model.predict(np.column_stack([x, np.zeros(m)]))
    y1 = model.predict(np.column_stack([x, np.ones(m)]))
    return y0, y1
