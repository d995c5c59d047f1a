import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from pdolearn.api import OperatorRegressor, WaveletTransformer
from pdolearn.estimator import FIXED_J
from pdolearn.fields import SCHRODINGER_POWER, GRFSpec, OperatorSpec, basis_for, generate_dataset
from pdolearn.wavelets import DUAL_TEST, PRIMAL_TEST, CoefVector, index_count


def test_transformer_roundtrip(rng):
    X = rng.standard_normal((4, 64))
    tr = WaveletTransformer().fit(X)
    C = tr.transform(X)
    assert C.shape == (4, 64)
    np.testing.assert_allclose(tr.inverse_transform(C), X, atol=1e-10)


def test_transformer_truncates_and_matches_basis(rng):
    X = rng.standard_normal((3, 64))
    C = WaveletTransformer(J=3, flavor=PRIMAL_TEST).fit_transform(X)
    assert C.shape == (3, 16)
    basis = basis_for(2)
    np.testing.assert_allclose(C, basis.analysis(X, PRIMAL_TEST, 3).data)


def test_transformer_errors(rng):
    with pytest.raises(NotFittedError):
        WaveletTransformer().transform(rng.standard_normal((2, 16)))
    with pytest.raises(ValueError):
        WaveletTransformer().fit(rng.standard_normal((2, 12)))
    tr = WaveletTransformer().fit(rng.standard_normal((2, 16)))
    with pytest.raises(ValueError):
        tr.transform(rng.standard_normal((2, 32)))


def test_params_follow_sklearn_conventions():
    reg = OperatorRegressor(t=0.5, mode=FIXED_J, J=3)
    assert reg.get_params()["t"] == 0.5
    other = clone(reg)
    assert other.get_params() == reg.get_params()
    assert WaveletTransformer(dt=2).get_params()["dt"] == 2


def test_regressor_fit_predict_score():
    basis = basis_for(6)
    op = OperatorSpec(SCHRODINGER_POWER, order=-2.0)
    data = generate_dataset(300, op, GRFSpec(1.5), None, 3, 0, basis)
    reg = OperatorRegressor(mode=FIXED_J, J=2).fit(data.U, data.F)
    m = index_count(2)
    assert reg.coef_.shape == (m, m)
    pred = reg.predict(data.U)
    np.testing.assert_allclose(pred, data.U[:, :m] @ reg.coef_)
    assert reg.score(data.U, data.F) > 0.99
    with pytest.raises(ValueError):
        reg.predict(data.U[:, :4])


def test_regressor_unfitted_and_shape_errors(rng):
    with pytest.raises(NotFittedError):
        OperatorRegressor().predict(rng.standard_normal((2, 8)))
    with pytest.raises(ValueError):
        OperatorRegressor().fit(rng.standard_normal((20, 8)), rng.standard_normal((20, 16)))


def test_transformer_feeds_regressor():
    basis = basis_for(6)
    op = OperatorSpec(SCHRODINGER_POWER, order=-2.0)
    data = generate_dataset(200, op, GRFSpec(1.5), None, 3, 1, basis)
    u = basis.synthesis(CoefVector(data.U, DUAL_TEST))
    tr = WaveletTransformer(J=3).fit(u)
    np.testing.assert_allclose(tr.transform(u), data.U, atol=1e-10)
