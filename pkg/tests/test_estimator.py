import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from kbalayage import GridSpec, Measure, PartialBalayage, c_k, Medium


def test_fit_predict_point_mass():
    c = float(c_k(Medium(2, 1.0), 1.0))
    est = PartialBalayage(N=2, k=1.0, h=0.05, compute_lambda1=False).fit([[0.0, 0.0, c]])
    assert est.feasible_
    pred = est.predict([[0.0, 0.0], [0.5, 0.5], [1.3, 0.0], [50.0, 0.0]])
    assert pred.tolist() == [True, True, False, False]
    assert est.decision_function([[0.0, 0.5]])[0] > 0
    T = est.transform([[0.0, 0.0], [50.0, 0.0]])
    assert T.shape == (2, 1) and np.isfinite(T[0, 0]) and np.isnan(T[1, 0])
    assert est.n_features_in_ == 2


def test_params_and_clone():
    est = PartialBalayage(N=3, k=0.5, rho=2.0)
    params = est.get_params()
    assert params["N"] == 3 and params["rho"] == 2.0
    c = clone(est).set_params(k=1.5)
    assert c.k == 1.5 and est.k == 0.5


def test_measure_and_explicit_box():
    box = GridSpec.centered([0.0, 0.0], 2.0, 0.05)
    est = PartialBalayage(box=box, compute_lambda1=True).fit(Measure.uniform_ball([0.0, 0.0], 0.5, density=3.0))
    assert est.result_.spec == box
    assert est.lambda1_ > 1.0
    assert est.fit_predict(Measure.uniform_ball([0.0, 0.0], 0.5, density=3.0), [[0.0, 0.0]])[0]


def test_not_fitted():
    with pytest.raises(NotFittedError):
        PartialBalayage().predict([[0.0, 0.0]])


@pytest.mark.parametrize(
    "params,X",
    [
        ({"N": 4}, [[0, 0, 0, 0, 1.0]]),
        ({"k": -1.0}, [[0, 0, 1.0]]),
        ({}, [[0, 0, -1.0]]),
        ({}, [[0, 1.0]]),
        ({}, [[0, np.nan, 1.0]]),
        ({"box": "auto"}, [[0, 0, 1.0]]),
    ],
)
def test_invalid_inputs(params, X):
    with pytest.raises((ValueError, TypeError)):
        PartialBalayage(**params).fit(X)


def test_predict_dimension_checked():
    est = PartialBalayage(h=0.1, compute_lambda1=False).fit([[0.0, 0.0, 3.0]])
    with pytest.raises(ValueError):
        est.predict([[0.0, 0.0, 0.0]])
