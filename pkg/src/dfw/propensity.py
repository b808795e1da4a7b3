"""Treatment-assignment models: ridge-penalised logistic regression (IRLS)
and the covariate balancing propensity score."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .data import PropensityFit
from .errors import (
    ConvergenceError,
    DimensionMismatchError,
    EmptyArmError,
    NonFiniteObjectiveError,
    SingularSystemError,
    TreatmentCodingError,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LogisticConfig:
    ridge_penalty: float = 1e-6
    max_iterations: int = 100
    convergence_tol: float = 1e-8
    probability_floor: float = 1e-6

    def __post_init__(self):
        vals = (self.ridge_penalty, self.convergence_tol, self.probability_floor)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("LogisticConfig fields must be finite")
        if self.ridge_penalty < 0 or self.convergence_tol <= 0 or self.max_iterations < 1:
            raise ValueError("invalid LogisticConfig")
        if not 0 < self.probability_floor < 0.5:
            raise ValueError("probability_floor must lie in (0, 0.5)")


@dataclass(frozen=True)
class CbpsConfig:
    max_iterations: int = 500
    gradient_tol: float = 1e-8
    ridge_penalty: float = 1e-6
    init: str = "LOGISTIC_MLE"
    probability_floor: float = 1e-6

    def __post_init__(self):
        if self.init not in ("LOGISTIC_MLE", "ZERO"):
            raise ValueError(f"unknown CBPS init {self.init!r}")
        if self.max_iterations < 1 or not self.gradient_tol > 0 or self.ridge_penalty < 0:
            raise ValueError("invalid CbpsConfig")
        if not 0 < self.probability_floor < 0.5:
            raise ValueError("probability_floor must lie in (0, 0.5)")


def _design(covariates):
    x = np.asarray(covariates, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    return np.column_stack([np.ones(x.shape[0]), x])


def _check_binary(covariates, treatment):
    t = np.asarray(treatment)
    x = np.asarray(covariates, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.shape[0] != t.shape[0]:
        raise DimensionMismatchError(f"{x.shape[0]} covariate rows vs {t.shape[0]} treatments")
    if not np.isin(t, (0, 1)).all():
        raise TreatmentCodingError("binary treatment expected")
    if t.min() == t.max():
        raise EmptyArmError("both treatment arms must be non-empty")
    return x, t.astype(float)


def _binary_matrix(e):
    return np.column_stack([1.0 - e, e])


def _floored(z, floor):
    return np.clip(expit(z), floor, 1.0 - floor)


def penalized_loglik(beta, covariates, treatment, ridge_penalty):
    """Bernoulli log-likelihood minus ``ridge/2 * |beta[1:]|^2``.

    The intercept is not penalised.
    """
    a = _design(covariates)
    t = np.asarray(treatment, dtype=float)
    z = a @ beta
    ll = np.sum(t * z - np.logaddexp(0.0, z))
    return ll - 0.5 * ridge_penalty * np.sum(beta[1:] ** 2)


def penalized_score(beta, covariates, treatment, ridge_penalty):
    a = _design(covariates)
    t = np.asarray(treatment, dtype=float)
    g = a.T @ (t - expit(a @ beta))
    g[1:] -= ridge_penalty * beta[1:]
    return g


def fit_logistic(covariates, treatment, config: LogisticConfig = LogisticConfig()) -> PropensityFit:
    """Ridge-penalised logistic regression by iteratively reweighted least squares.

    Each Newton step is halved until the penalised log-likelihood does not
    decrease, which keeps the iteration stable near quasi-separation.
    Probabilities are clipped to ``[floor, 1 - floor]`` after fitting.

    Raises:
        ConvergenceError: no convergence within ``max_iterations``.
        SingularSystemError: the weighted normal equations cannot be solved.
    """
    x, t = _check_binary(covariates, treatment)
    a = _design(x)
    n, p = a.shape
    pen = np.full(p, config.ridge_penalty)
    pen[0] = 0.0
    beta = np.zeros(p)
    beta[0] = np.log(t.mean() / (1.0 - t.mean()))
    obj = penalized_loglik(beta, x, t, config.ridge_penalty)
    for it in range(1, config.max_iterations + 1):
        mu = expit(a @ beta)
        score = a.T @ (t - mu) - pen * beta
        hess = a.T @ (a * (mu * (1.0 - mu))[:, None]) + np.diag(pen)
        try:
            step = np.linalg.solve(hess, score)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(f"IRLS normal equations singular at iteration {it}") from exc
        if not np.all(np.isfinite(step)):
            raise SingularSystemError(f"IRLS produced a non-finite step at iteration {it}")
        scale = 1.0
        while True:
            cand = beta + scale * step
            cand_obj = penalized_loglik(cand, x, t, config.ridge_penalty)
            if cand_obj >= obj - 1e-12 * abs(obj) or scale < 1e-10:
                break
            scale *= 0.5
        change = np.max(np.abs(cand - beta))
        beta, obj = cand, cand_obj
        if change <= config.convergence_tol and scale == 1.0:
            break
    else:
        g = penalized_score(beta, x, t, config.ridge_penalty)
        raise ConvergenceError(
            f"IRLS did not converge in {config.max_iterations} iterations "
            f"(score max-norm {np.max(np.abs(g)):.3e})"
        )
    e = _floored(a @ beta, config.probability_floor)
    return PropensityFit(beta, _binary_matrix(e), "LOGISTIC", config.probability_floor, it)


def predict_propensity(fit: PropensityFit, covariates) -> np.ndarray:
    """m x 2 class-probability matrix under the fitted logistic link."""
    x = np.asarray(covariates, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.shape[1] + 1 != len(fit.coefficients):
        raise DimensionMismatchError(
            f"model expects {len(fit.coefficients) - 1} covariates, got {x.shape[1]}")
    return _binary_matrix(_floored(_design(x) @ fit.coefficients, fit.probability_floor))


# --------------------------------------------------------------------------
# CBPS
# --------------------------------------------------------------------------

def _balance_terms(beta, a, t, floor):
    z = a @ beta
    e = _floored(z, floor)
    g = t / e - (1.0 - t) / (1.0 - e)
    return z, e, g


def balance_residual(beta, covariates, treatment, floor=1e-6):
    """(1/n) sum_i [t_i / e_i - (1 - t_i) / (1 - e_i)] * (1, x_i)."""
    a = _design(covariates)
    t = np.asarray(treatment, dtype=float)
    _, _, g = _balance_terms(np.asarray(beta, dtype=float), a, t, floor)
    return a.T @ g / a.shape[0]


def cbps_objective(beta, covariates, treatment, ridge_penalty=1e-6, floor=1e-6):
    """Squared norm of the balance residual plus ``ridge * |beta|^2``."""
    beta = np.asarray(beta, dtype=float)
    r = balance_residual(beta, covariates, treatment, floor)
    return float(r @ r + ridge_penalty * beta @ beta)


def _cbps_value_grad(beta, a, t, lam, floor):
    n = a.shape[0]
    z, e, g = _balance_terms(beta, a, t, floor)
    r = a.T @ g / n
    f = r @ r + lam * beta @ beta
    # d g_i / d z_i; zero where the floor is active
    raw = expit(z)
    active = (raw > floor) & (raw < 1.0 - floor)
    dg = np.where(active, -t * (1.0 - e) / e - (1.0 - t) * e / (1.0 - e), 0.0)
    jac = (a * dg[:, None]).T @ a / n
    grad = 2.0 * jac.T @ r + 2.0 * lam * beta
    return f, grad, jac, r


def fit_cbps(covariates, treatment, config: CbpsConfig = CbpsConfig()) -> PropensityFit:
    """Minimise the covariate-balance objective over logistic coefficients.

    Descent directions are Gauss-Newton preconditioned gradients
    ``-(J^T J + mu I)^{-1} grad``; step sizes come from Armijo backtracking,
    so every accepted step lowers the objective. The per-iteration objective
    values are kept in ``objective_trace``.

    Raises:
        ConvergenceError: gradient still above ``gradient_tol`` after
            ``max_iterations`` or when no descent step can be found.
        NonFiniteObjectiveError: objective evaluates to inf/nan.
    """
    x, t = _check_binary(covariates, treatment)
    a = _design(x)
    floor = config.probability_floor
    lam = config.ridge_penalty
    if config.init == "LOGISTIC_MLE":
        beta = fit_logistic(x, t, LogisticConfig(ridge_penalty=lam, probability_floor=floor)).coefficients.copy()
    else:
        beta = np.zeros(a.shape[1])

    f, grad, jac, _ = _cbps_value_grad(beta, a, t, lam, floor)
    if not np.isfinite(f):
        raise NonFiniteObjectiveError("CBPS objective is not finite at the initial point")
    trace = [float(f)]
    eye = np.eye(len(beta))
    it = 0
    while np.max(np.abs(grad)) > config.gradient_tol:
        it += 1
        if it > config.max_iterations:
            raise ConvergenceError(
                f"CBPS did not converge in {config.max_iterations} iterations "
                f"(gradient max-norm {np.max(np.abs(grad)):.3e})")
        mu = 1e-10 * max(1.0, np.trace(jac.T @ jac))
        try:
            d = -np.linalg.solve(jac.T @ jac + (mu + lam) * eye, 0.5 * grad)
        except np.linalg.LinAlgError:
            d = -grad
        slope = grad @ d
        if not slope < 0:
            d, slope = -grad, -(grad @ grad)
        step = 1.0
        while True:
            cand = beta + step * d
            fc, gc, jc, _ = _cbps_value_grad(cand, a, t, lam, floor)
            if np.isfinite(fc) and fc <= f + 1e-4 * step * slope:
                break
            step *= 0.5
            if step < 1e-14:
                # numerically stationary: no representable descent step left
                if np.max(np.abs(grad)) <= 1e-6 * max(1.0, abs(f)) ** 0.5:
                    return PropensityFit(beta, _binary_matrix(_floored(a @ beta, floor)), "CBPS",
                                         floor, it, tuple(trace))
                raise ConvergenceError(
                    f"CBPS line search failed at iteration {it} "
                    f"(gradient max-norm {np.max(np.abs(grad)):.3e})")
        if not np.isfinite(fc):
            raise NonFiniteObjectiveError(f"CBPS objective became non-finite at iteration {it}")
        beta, f, grad, jac = cand, fc, gc, jc
        trace.append(float(f))
        log.debug("cbps iter %d objective %.6e", it, f)
    e = _floored(a @ beta, floor)
    return PropensityFit(beta, _binary_matrix(e), "CBPS", floor, it, tuple(trace))
