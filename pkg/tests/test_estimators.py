import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import FunctionTransformer

from conftest import PHI
from takagi.core import TakagiParams, evaluate_many
from takagi.estimators import (
    AssouadProbeEstimator,
    BoxDimensionEstimator,
    LevelSetEstimator,
    TakagiTransformer,
)
from takagi.exceptions import ValidationError


def test_transformer_params_and_clone():
    t = TakagiTransformer(a=0.25, b=4, tol=1e-8)
    assert t.get_params() == {"a": 0.25, "b": 4, "tol": 1e-8}
    c = clone(t).set_params(a=0.5)
    assert c.a == 0.5 and t.a == 0.25


def test_transformer_matches_functional_api():
    X = np.linspace(0, 1, 11)[:, None]
    out = TakagiTransformer(a=PHI / 8, b=8, tol=1e-10).fit_transform(X)
    ref, _, _ = evaluate_many(TakagiParams(PHI / 8, 8), X[:, 0], 1e-10)
    assert out.shape == (11, 1)
    assert np.array_equal(out[:, 0], ref)


def test_transformer_validation():
    with pytest.raises(NotFittedError):
        TakagiTransformer().transform([[0.1]])
    t = TakagiTransformer().fit()
    assert t.error_bound_ <= 1e-12
    with pytest.raises(ValueError):
        t.transform(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        t.transform([[np.nan]])
    with pytest.raises(ValidationError):
        TakagiTransformer(a=2.0).fit()


def test_transformer_in_pipeline():
    pipe = make_pipeline(FunctionTransformer(lambda X: X / 2), TakagiTransformer())
    out = pipe.fit_transform(np.array([[2 / 3]]))
    assert out[0, 0] == pytest.approx(2 / 3, abs=1e-11)


def test_box_dimension_estimator():
    est = BoxDimensionEstimator(depths=range(4, 16)).fit()
    assert est.dimension_ == pytest.approx(1.0455431364743892, abs=1e-12)
    assert est.theoretical_ == 1.0
    assert clone(est).get_params()["depths"] == range(4, 16)


def test_level_set_estimator():
    est = LevelSetEstimator(a=PHI / 8, b=8, depth=3).fit()
    assert est.certificate_.k == 3
    assert len(est.approx_.intervals) == 128
    assert est.dimension_ == pytest.approx(1 / 3, abs=1e-12)
    shallow = LevelSetEstimator(depth=1).fit()
    assert shallow.dimension_ == 0.5 and shallow.level_value_ == 0.5
    with pytest.raises(ValueError):
        LevelSetEstimator(a=0.9999 / 2, b=2).fit()


def test_assouad_probe_estimator():
    est = AssouadProbeEstimator(a=PHI / 8, b=8, M_range=range(2, 7)).fit()
    assert est.exponent_ == pytest.approx(1.43888034862097, abs=1e-9)
    # With ab = 1 the default window exponent degenerates and must be given.
    with pytest.raises(ValidationError):
        AssouadProbeEstimator().fit()
    assert AssouadProbeEstimator(theta=0.5, M_range=(2, 3, 4)).fit().exponent_ > 0
