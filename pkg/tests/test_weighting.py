import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dfw.errors import DimensionMismatchError
from dfw.weighting import SchemeSpec, cv_of_weights, dfw_weights, ipw_weights, overlap_weights, scheme_weights, unit_weights

probs = st.floats(1e-6, 1 - 1e-6)


@pytest.mark.parametrize("p_obs, w", [(0.75, 0.25), (0.25, 0.75), (0.5, 0.5)])
def test_dfw_binary_examples(p_obs, w):
    got = dfw_weights(np.array([[1 - p_obs, p_obs]]), [1]).weights[0]
    assert got == pytest.approx(w, abs=1e-15)


def test_dfw_multiclass_row():
    assert dfw_weights(np.array([[0.2, 0.5, 0.3]]), [1]).weights[0] == pytest.approx(0.5)


def test_dfw_index_mismatch():
    with pytest.raises(DimensionMismatchError):
        dfw_weights(np.array([[0.2, 0.8]]), [2])
    with pytest.raises(DimensionMismatchError):
        dfw_weights(np.array([[0.2, 0.8]]), [0, 1])


def test_ipw_examples():
    assert ipw_weights([0.5], [1]).weights[0] == 2.0
    assert ipw_weights([0.75], [0]).weights[0] == pytest.approx(4.0)
    assert ipw_weights([1e-6], [1]).weights[0] == pytest.approx(1e6)


def test_overlap_examples():
    np.testing.assert_allclose(overlap_weights([0.8, 0.8], [1, 0]).weights, [0.2, 0.8])


def test_cv_examples():
    assert cv_of_weights(np.full(5, 3.0)) == 0.0
    assert cv_of_weights(np.array([1.0, 3.0])) == pytest.approx(0.5)
    p = np.full(6, 0.1)
    assert not cv_of_weights(1 - p) < cv_of_weights(1 / p)


def test_scheme_spec_forces_cbps_source():
    assert SchemeSpec("CBPS").propensity_source == "CBPS"
    assert SchemeSpec("DFW").propensity_source == "LOGISTIC"
    with pytest.raises(ValueError):
        SchemeSpec("NOPE")


def test_scheme_dispatch():
    e = np.array([0.2, 0.7, 0.4])
    t = np.array([1, 0, 1])
    p = np.column_stack([1 - e, e])
    assert scheme_weights("UNIT", p, t).weights.tolist() == [1.0, 1.0, 1.0]
    np.testing.assert_allclose(scheme_weights("IPW", p, t).weights, [5.0, 1 / 0.3, 2.5])
    np.testing.assert_allclose(scheme_weights("CBPS", p, t, p).weights, [5.0, 1 / 0.3, 2.5])
    assert scheme_weights("CBPS", p, t, p).scheme == "CBPS"
    assert unit_weights(4).scheme == "UNIT"


@given(arrays(float, st.integers(1, 50), elements=probs), st.data())
def test_property_bounds_and_identity(e, data):
    t = np.array(data.draw(st.lists(st.integers(0, 1), min_size=len(e), max_size=len(e))))
    d = dfw_weights(np.column_stack([1 - e, e]), t).weights
    o = overlap_weights(e, t).weights
    assert ((d > 0) & (d < 1)).all()
    assert ((o > 0) & (o < 1)).all()
    assert (ipw_weights(e, t).weights >= 1).all()
    assert np.max(np.abs(d - o)) <= 1e-15


@given(st.floats(1e-6, 1 - 1e-6), st.floats(1e-6, 1 - 1e-6))
def test_property_dfw_decreasing(a, b):
    if a == b:
        return
    lo, hi = min(a, b), max(a, b)
    w = dfw_weights(np.array([[1 - lo, lo], [1 - hi, hi]]), [1, 1]).weights
    # strict whenever 1 - p can tell the two inputs apart in double precision
    if 1 - lo != 1 - hi:
        assert w[0] > w[1]
    else:
        assert w[0] == w[1]


def test_inverse_amplifies_variance():
    u = np.random.default_rng(0).uniform(0.2, 0.8, 10**6)
    assert np.var(1 / u) > np.var(u)
    # closed form on U[0.2, 0.8]: Var(u) = 0.03, Var(1/u) = 6.25 - (ln 4 / 0.6)^2
    exact = (6.25 - (np.log(4) / 0.6) ** 2) / 0.03
    assert np.var(1 / u) / np.var(u) == pytest.approx(exact, rel=0.01)


@pytest.mark.xfail(strict=True, reason="second-order Taylor ratio 1/E[u]^4 = 16 vs exact 30.4 on U[0.2, 0.8]")
def test_taylor_variance_ratio_within_35_percent():
    u = np.random.default_rng(0).uniform(0.2, 0.8, 10**6)
    ratio = np.var(1 / u) / np.var(u)
    taylor = 1 / np.mean(u) ** 4
    assert abs(ratio - taylor) / ratio < 0.35
