import numpy as np
import pytest

from dfw.data import DatasetBundle, PropensityFit, WeightVector, read_bundle_csv, validate_bundle, write_bundle_csv
from dfw.errors import EmptyArmError, SchemaError, ShapeMismatchError, TreatmentCodingError
from dfw.synthetic import RoleGenConfig, generate_linear, generate_roles


def _bundle(n=10, t=None, **kw):
    x = np.arange(2 * n, dtype=float).reshape(n, 2)
    t = np.r_[np.ones(n // 2), np.zeros(n - n // 2)] if t is None else t
    return DatasetBundle(covariates=x, treatment=t, outcome_factual=np.zeros(n), **kw)


def test_ihdp_sized_bundle_accepted():
    t = np.r_[np.ones(139), np.zeros(747 - 139)]
    b = DatasetBundle(covariates=np.zeros((747, 25)), treatment=t, outcome_factual=np.zeros(747))
    assert validate_bundle(b) is b
    assert (b.n, b.k, int(b.treatment.sum())) == (747, 25, 139)


def test_empty_bundle_rejected():
    with pytest.raises(ShapeMismatchError):
        validate_bundle(DatasetBundle(covariates=np.zeros((0, 2)), treatment=[], outcome_factual=[]))


def test_out_of_range_treatment_rejected():
    with pytest.raises(TreatmentCodingError):
        validate_bundle(_bundle(t=np.r_[np.zeros(9), 2]))


def test_length_mismatch_and_empty_arm():
    with pytest.raises(ShapeMismatchError):
        validate_bundle(DatasetBundle(covariates=np.zeros((4, 1)), treatment=[0, 1, 0], outcome_factual=np.zeros(4)))
    with pytest.raises(EmptyArmError):
        validate_bundle(_bundle(t=np.zeros(10)))
    validate_bundle(_bundle(t=np.zeros(10)), require_both_arms=False)


def test_multi_arm_coding_accepted():
    b = _bundle(n=9, t=np.arange(9) % 3, n_treatments=3)
    assert validate_bundle(b) is b


def test_factual_consistency_checked():
    t = np.r_[1, 0, 1, 0]
    y0, y1 = np.arange(4.0), np.arange(4.0) + 1
    ok = DatasetBundle(covariates=np.zeros((4, 1)), treatment=t, outcome_factual=np.where(t == 1, y1, y0),
                       outcome_y0=y0, outcome_y1=y1)
    assert validate_bundle(ok) is ok
    bad = DatasetBundle(covariates=np.zeros((4, 1)), treatment=t, outcome_factual=y0, outcome_y0=y0, outcome_y1=y1)
    with pytest.raises(SchemaError):
        validate_bundle(bad)


def test_validation_is_idempotent():
    b = generate_linear()
    assert validate_bundle(validate_bundle(b)).identical_to(b)


def test_bundle_arrays_are_read_only():
    b = _bundle()
    with pytest.raises(ValueError):
        b.covariates[0, 0] = 1.0


def test_weight_vector_and_fit_types():
    WeightVector(np.ones(3), "UNIT")
    with pytest.raises(ValueError):
        WeightVector(np.ones(3), "BOGUS")
    p = np.array([[0.3, 0.7], [0.9, 0.1]])
    fit = PropensityFit(np.zeros(2), p, "LOGISTIC")
    np.testing.assert_array_equal(fit.propensity, [0.7, 0.1])


def test_csv_round_trip_is_exact(tmp_path):
    b = generate_roles(RoleGenConfig(n=50, seed=3))
    path = write_bundle_csv(b, tmp_path / "roles.csv", config={"seed": 3})
    back = read_bundle_csv(path)
    assert back.identical_to(b)
    assert back.feature_roles == b.feature_roles
    assert (tmp_path / "roles.json").exists()
