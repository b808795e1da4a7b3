"""Treatment-effect estimates from weights and outcome models, and their
scores against ground truth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .balance import weighted_mean
from .data import DatasetBundle, WeightVector
from .errors import DimensionMismatchError, EmptyArmError, MissingCounterfactualError, ZeroWeightError
from .outcome import (
    KernelRidgeConfig,
    RidgeConfig,
    fit_weighted_kernel_ridge,
    fit_weighted_ridge,
    predict_potential_outcomes,
)

ESTIMATORS = ("WEIGHTED_REGRESSION", "WEIGHTED_MEAN_DIFF")

# scheme -> estimator used unless a run overrides it
DEFAULT_BINDINGS = {
    "DFW": "WEIGHTED_REGRESSION",
    "IPW": "WEIGHTED_REGRESSION",
    "CBPS": "WEIGHTED_REGRESSION",
    "UNIT": "WEIGHTED_REGRESSION",
    "OVERLAP": "WEIGHTED_MEAN_DIFF",
}


@dataclass
class EffectEstimate:
    ate_hat: float
    estimator: str
    epsilon_ate: float | None = None
    pehe: float | None = None
    ite_hat: np.ndarray | None = None
    ate_true: float | None = None


def epsilon_ate(ate_true: float, ate_hat: float) -> float:
    return abs(float(ate_true) - float(ate_hat))


def pehe(ite_true, ite_hat) -> float:
    """Root mean squared error of individual effect estimates."""
    a = np.asarray(ite_true, dtype=float)
    b = np.asarray(ite_hat, dtype=float)
    if a.shape != b.shape or a.size == 0:
        raise DimensionMismatchError(f"ITE vectors {a.shape} and {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def true_ate(bundle: DatasetBundle) -> float:
    if not bundle.has_potential_outcomes:
        raise MissingCounterfactualError("bundle has no potential outcomes")
    return float(np.mean(bundle.outcome_y1 - bundle.outcome_y0))


def _score(est: EffectEstimate, evaluation: DatasetBundle, ate_truth: float | None):
    if evaluation.has_potential_outcomes:
        est.ate_true = true_ate(evaluation)
        ite = evaluation.outcome_y1 - evaluation.outcome_y0
        ite_hat = est.ite_hat if est.ite_hat is not None else np.full(evaluation.n, est.ate_hat)
        est.pehe = pehe(ite, ite_hat)
    elif ate_truth is not None:
        est.ate_true = float(ate_truth)
    if est.ate_true is not None:
        est.epsilon_ate = epsilon_ate(est.ate_true, est.ate_hat)
    return est


def _weights(weights, n):
    w = weights.weights if isinstance(weights, WeightVector) else np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise DimensionMismatchError(f"{w.shape[0]} weights for {n} rows")
    return w


def estimate_weighted_regression(train: DatasetBundle, weights, model_config=None,
                                 linearity: str = "LINEAR", evaluation: DatasetBundle | None = None,
                                 ate_truth: float | None = None) -> EffectEstimate:
    """Fit one weighted outcome model on ``[x, t]`` and contrast its predictions.

    The model is trained on ``train`` with ``weights``; the ATE is the mean
    of ``y1_hat - y0_hat`` over the rows of ``evaluation`` (``train`` when
    omitted). Scores are attached when ground truth is available.
    """
    w = _weights(weights, train.n)
    design = np.column_stack([train.covariates, train.treatment.astype(float)])
    if linearity == "LINEAR":
        model = fit_weighted_ridge(design, train.outcome_factual, w, model_config or RidgeConfig())
    elif linearity == "NONLINEAR":
        model = fit_weighted_kernel_ridge(design, train.outcome_factual, w,
                                          model_config or KernelRidgeConfig())
    else:
        raise ValueError(f"unknown linearity {linearity!r}")
    evaluation = train if evaluation is None else evaluation
    y0, y1 = predict_potential_outcomes(model, evaluation.covariates)
    ite_hat = y1 - y0
    est = EffectEstimate(float(ite_hat.mean()), "WEIGHTED_REGRESSION", ite_hat=ite_hat)
    return _score(est, evaluation, ate_truth)


def estimate_weighted_mean_diff(bundle: DatasetBundle, weights, ate_truth: float | None = None) -> EffectEstimate:
    """Hajek contrast of weighted arm means of the factual outcome."""
    w = _weights(weights, bundle.n)
    t = bundle.treatment
    tr, co = t == 1, t == 0
    if not tr.any() or not co.any():
        raise EmptyArmError("both arms must be non-empty")
    if not (w[tr].sum() > 0 and w[co].sum() > 0):
        raise ZeroWeightError("an arm has zero total weight")
    y = bundle.outcome_factual
    ate = weighted_mean(y[tr], w[tr]) - weighted_mean(y[co], w[co])
    return _score(EffectEstimate(ate, "WEIGHTED_MEAN_DIFF"), bundle, ate_truth)
