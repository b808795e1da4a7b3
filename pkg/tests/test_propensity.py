import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit, logit

from dfw.errors import ConvergenceError, DimensionMismatchError, EmptyArmError
from dfw.propensity import (
    CbpsConfig,
    LogisticConfig,
    balance_residual,
    cbps_objective,
    fit_cbps,
    fit_logistic,
    penalized_loglik,
    penalized_score,
    predict_propensity,
)
from oracles import grid_minimize_2d


def _fixture(n, seed, slope=1.2):
    r = np.random.default_rng(seed)
    x = r.normal(size=(n, 1))
    t = (r.random(n) < expit(0.3 + slope * x[:, 0])).astype(int)
    return x, t


def test_intercept_only_balanced():
    t = np.r_[np.ones(20), np.zeros(20)]
    fit = fit_logistic(np.zeros((40, 0)), t)
    assert fit.coefficients[0] == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(fit.propensity, 0.5, atol=1e-12)


def test_intercept_only_ihdp_fraction():
    t = np.r_[np.ones(139), np.zeros(747 - 139)]
    fit = fit_logistic(np.zeros((747, 0)), t)
    np.testing.assert_allclose(fit.propensity, 139 / 747, atol=1e-9)
    assert fit.coefficients[0] == pytest.approx(logit(139 / 747), abs=1e-9)


def test_logistic_matches_grid_search():
    x, t = _fixture(40, 1)
    fit = fit_logistic(x, t)
    best = grid_minimize_2d(lambda b: -penalized_loglik(b, x, t, 1e-6), [0.0, 0.0], 5.0)
    np.testing.assert_allclose(fit.coefficients, best, atol=1e-3)


@pytest.mark.parametrize("seed", range(5))
def test_score_small_and_matches_finite_differences(seed):
    r = np.random.default_rng(seed)
    x = r.normal(size=(300, 4))
    t = (r.random(300) < expit(x @ [1.0, -0.5, 0.3, 0.0])).astype(int)
    fit = fit_logistic(x, t)
    assert np.max(np.abs(penalized_score(fit.coefficients, x, t, 1e-6))) <= 1e-6 * len(t)
    beta = r.normal(size=5) * 0.3
    g = penalized_score(beta, x, t, 1e-6)
    h = 1e-5
    fd = np.array([(penalized_loglik(beta + h * e, x, t, 1e-6) - penalized_loglik(beta - h * e, x, t, 1e-6)) / (2 * h)
                   for e in np.eye(5)])
    assert np.max(np.abs(fd - g) / np.maximum(np.abs(g), 1e-8)) <= 1e-5


def test_probabilities_floored_and_row_stochastic():
    x = np.r_[np.linspace(-30, -1, 20), np.linspace(1, 30, 20)].reshape(-1, 1)
    t = np.r_[np.zeros(20), np.ones(20)]
    t[0], t[-1] = 1, 0  # break separation just barely
    fit = fit_logistic(x, t, LogisticConfig(probability_floor=1e-3))
    p = fit.probabilities
    assert (p >= 1e-3).all() and (p <= 1 - 1e-3).all()
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)


def test_predict_reproduces_training_probabilities():
    x, t = _fixture(200, 2)
    fit = fit_logistic(x, t)
    np.testing.assert_allclose(predict_propensity(fit, x), fit.probabilities, atol=1e-12)


def test_predict_zero_coefficients_and_dimension_check():
    x, t = _fixture(50, 3)
    fit = fit_logistic(x, t)
    zero = type(fit)(np.zeros(2), fit.probabilities, "LOGISTIC")
    np.testing.assert_allclose(predict_propensity(zero, np.ones((3, 1)))[:, 1], 0.5)
    with pytest.raises(DimensionMismatchError):
        predict_propensity(fit, np.ones((3, 2)))


def test_linear_fit_on_nonlinear_data_stays_in_unit_interval():
    from dfw.synthetic import generate_nonlinear

    b = generate_nonlinear()
    p = fit_logistic(b.covariates, b.treatment).propensity
    assert ((p > 0) & (p < 1)).all()


def test_errors():
    x, t = _fixture(30, 4)
    with pytest.raises(EmptyArmError):
        fit_logistic(x, np.zeros(30))
    with pytest.raises(ConvergenceError):
        fit_logistic(x, t, LogisticConfig(max_iterations=1))


def test_cbps_never_worse_than_logistic_start():
    for seed in range(8):
        x, t = _fixture(120, seed, slope=2.0)
        lf = fit_logistic(x, t)
        cf = fit_cbps(x, t)
        assert cf.estimator == "CBPS"
        assert cbps_objective(cf.coefficients, x, t) <= cbps_objective(lf.coefficients, x, t) + 1e-9


def test_cbps_trace_monotone():
    x, t = _fixture(200, 11, slope=2.5)
    trace = np.array(fit_cbps(x, t, CbpsConfig(init="ZERO")).objective_trace)
    assert (np.diff(trace) <= 0).all()


def test_cbps_balanced_at_zero():
    # symmetric covariate within each arm, equal arm sizes: residual 0 at beta = 0
    x = np.r_[-1.0, 1.0, -2.0, 2.0, -1.0, 1.0, -2.0, 2.0].reshape(-1, 1)
    t = np.r_[1, 1, 1, 1, 0, 0, 0, 0]
    fit = fit_cbps(x, t, CbpsConfig(init="ZERO"))
    assert np.linalg.norm(balance_residual(fit.coefficients, x, t)) <= 1e-8


def test_cbps_matches_grid_search():
    x, t = _fixture(60, 5)
    fit = fit_cbps(x, t)
    best = grid_minimize_2d(lambda b: cbps_objective(b, x, t), fit.coefficients * 0, 5.0)
    np.testing.assert_allclose(fit.coefficients, best, atol=1e-2)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_property_probabilities_in_bounds(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(20, 120))
    x = r.normal(size=(n, 2)) * r.uniform(0.5, 3)
    t = (r.random(n) < expit(x @ r.normal(size=2))).astype(int)
    if t.min() == t.max():
        t[0] = 1 - t[0]
    fit = fit_logistic(x, t)
    assert (fit.probabilities >= 1e-6).all() and (fit.probabilities <= 1 - 1e-6).all()
