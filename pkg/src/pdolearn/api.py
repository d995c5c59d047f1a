"""scikit-learn style wrappers around the transform and the estimator."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .estimator import AUTO_J, STANDARD, EstimatorConfig, estimate
from .wavelets import DUAL_TEST, CoefVector, WaveletBasis, WaveletParams, index_count


class WaveletTransformer(TransformerMixin, BaseEstimator):
    """Grid samples -> wavelet coefficients up to level ``J`` (rows are samples)."""

    def __init__(self, d=2, dt=4, J=None, flavor=DUAL_TEST):
        self.d = d
        self.dt = dt
        self.J = J
        self.flavor = flavor

    def fit(self, X, y=None):
        X = check_array(X)
        G = X.shape[1]
        if G < 2 or G & (G - 1):
            raise ValueError("sample count per row must be a power of two")
        self.basis_ = WaveletBasis(WaveletParams(d=self.d, dt=self.dt, Jmax=int(np.log2(G)) - 1))
        self.level_ = self.basis_.Jmax if self.J is None else int(self.J)
        self.n_features_in_ = G
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} samples per row, got {X.shape[1]}")
        return self.basis_.analysis(X, self.flavor, self.level_).data

    def inverse_transform(self, C):
        check_is_fitted(self, "basis_")
        C = check_array(C)
        return self.basis_.synthesis(CoefVector(C, self.flavor))


class OperatorRegressor(RegressorMixin, BaseEstimator):
    """Fit ``F ~ U A`` with the nested-support estimator; predict ``U_J A``."""

    def __init__(
        self,
        t=1.0,
        tp=1.0,
        r=-2.0,
        r1=1.5,
        r2=1.5,
        sigma=2.25,
        dt=4,
        a=2.0,
        jitter=1e-10,
        mode=AUTO_J,
        J=None,
        support=STANDARD,
        eps=0.25,
    ):
        self.t = t
        self.tp = tp
        self.r = r
        self.r1 = r1
        self.r2 = r2
        self.sigma = sigma
        self.dt = dt
        self.a = a
        self.jitter = jitter
        self.mode = mode
        self.J = J
        self.support = support
        self.eps = eps

    def _config(self):
        return EstimatorConfig(**self.get_params())

    def fit(self, U, F):
        U = check_array(U)
        F = check_array(F)
        if U.shape != F.shape:
            raise ValueError("U and F must have the same shape")
        self.learned_ = estimate((U, F), self._config())
        self.n_features_in_ = U.shape[1]
        return self

    def predict(self, U):
        check_is_fitted(self, "learned_")
        U = check_array(U)
        m = index_count(self.learned_.J)
        if U.shape[1] < m:
            raise ValueError(f"need at least {m} coefficient columns")
        return self.learned_.predict(U)

    def score(self, U, F, sample_weight=None):
        """R^2 on the level-J response columns."""
        check_is_fitted(self, "learned_")
        m = index_count(self.learned_.J)
        F = check_array(F)
        return super().score(U, F[:, :m], sample_weight)

    @property
    def coef_(self):
        check_is_fitted(self, "learned_")
        return self.learned_.A.toarray()
