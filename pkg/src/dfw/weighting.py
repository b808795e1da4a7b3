"""Propensity probabilities to per-sample weights."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SCHEMES, WeightVector
from .errors import DimensionMismatchError, ZeroMeanError


@dataclass(frozen=True)
class SchemeSpec:
    """Weighting scheme plus the propensity model feeding it.

    The CBPS scheme always draws on CBPS propensities; the rest default to
    the logistic fit.
    """

    scheme: str
    propensity_source: str = "LOGISTIC"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "CBPS":
            object.__setattr__(self, "propensity_source", "CBPS")
        if self.propensity_source not in ("LOGISTIC", "CBPS"):
            raise ValueError(f"unknown propensity source {self.propensity_source!r}")


def dfw_weights(probabilities, treatment) -> WeightVector:
    """Deconfounding-factor weights, ``1 - P(T = t_i | x_i)``.

    Works for any number of treatment levels: ``probabilities`` is an n x M
    matrix and ``treatment[i]`` selects the column of the arm row ``i``
    actually received.
    """
    p = np.asarray(probabilities, dtype=float)
    t = np.asarray(treatment, dtype=np.int64)
    if p.ndim != 2 or p.shape[0] != t.shape[0]:
        raise DimensionMismatchError(f"probabilities {p.shape} vs treatment {t.shape}")
    if t.min() < 0 or t.max() >= p.shape[1]:
        raise DimensionMismatchError("treatment index outside the probability columns")
    return WeightVector(1.0 - p[np.arange(len(t)), t], "DFW")


def _binary_inputs(e, treatment):
    e = np.asarray(e, dtype=float)
    t = np.asarray(treatment)
    if e.shape != t.shape:
        raise DimensionMismatchError(f"propensities {e.shape} vs treatment {t.shape}")
    return e, t == 1


def ipw_weights(e, treatment, scheme: str = "IPW") -> WeightVector:
    """``1/e`` for treated rows, ``1/(1-e)`` for controls. No clipping.

    ``scheme`` lets CBPS propensities be tagged as CBPS weights.
    """
    e, treated = _binary_inputs(e, treatment)
    return WeightVector(np.where(treated, 1.0 / e, 1.0 / (1.0 - e)), scheme)


def overlap_weights(e, treatment) -> WeightVector:
    e, treated = _binary_inputs(e, treatment)
    return WeightVector(np.where(treated, 1.0 - e, e), "OVERLAP")


def unit_weights(n: int) -> WeightVector:
    return WeightVector(np.ones(n), "UNIT")


def cv_of_weights(w) -> float:
    """Coefficient of variation, population standard deviation over mean."""
    a = np.asarray(w.weights if isinstance(w, WeightVector) else w, dtype=float)
    mu = a.mean()
    if not mu > 0:
        raise ZeroMeanError("weights have non-positive mean")
    return float(a.std() / mu)


def scheme_weights(scheme: str, fit_probabilities, treatment, cbps_probabilities=None) -> WeightVector:
    """Build weights for ``scheme`` from n x 2 propensity matrices."""
    t = np.asarray(treatment)
    if scheme == "DFW":
        return dfw_weights(fit_probabilities, t)
    if scheme == "IPW":
        return ipw_weights(fit_probabilities[:, 1], t)
    if scheme == "OVERLAP":
        return overlap_weights(fit_probabilities[:, 1], t)
    if scheme == "CBPS":
        if cbps_probabilities is None:
            raise ValueError("CBPS weights need CBPS propensities")
        return ipw_weights(cbps_probabilities[:, 1], t, scheme="CBPS")
    if scheme == "UNIT":
        return unit_weights(len(t))
    raise ValueError(f"unknown scheme {scheme!r}")
