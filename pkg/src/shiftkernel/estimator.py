"""Importance-weighted spectral-filter regression with vector outputs.

For source inputs ``x_1..x_n`` with outputs ``y_i`` in ``R^p`` and weights
``beta_i``, the fitted predictor is ``f(x) = C k(x)`` where ``k(x)`` is the
cross-kernel vector against the training inputs and::

    C = Y^T B^{1/2} (1/n) g_lam((1/n) B^{1/2} K B^{1/2}) B^{1/2}

with ``B = diag(beta)``. ``C`` is computed once at fit time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import (
    ValidationError,
    as_matrix,
    as_outputs,
    as_vector,
    as_weights,
    check_same_dim,
)
from .kernels import KernelSpec, cross_gram, cross_kernel_vector, gram
from .spectral import FilterSpec, apply_filter_matrix, clamp_spectrum, filter_value, sym_eig


@dataclass(frozen=True)
class ShiftDataset:
    """Labeled source sample ``(Xs, Y)``, unlabeled target inputs ``Xt``, optional exact weights."""

    Xs: np.ndarray
    Y: np.ndarray
    Xt: np.ndarray
    beta: np.ndarray | None = None

    def __post_init__(self):
        Xs = as_matrix(self.Xs, "Xs")
        Y = as_outputs(self.Y, Xs.shape[0])
        Xt = as_matrix(self.Xt, "Xt")
        check_same_dim(Xs.shape[1], Xt.shape[1], "source/target column count")
        object.__setattr__(self, "Xs", Xs)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "Xt", Xt)
        if self.beta is not None:
            object.__setattr__(self, "beta", as_weights(self.beta, Xs.shape[0]))

    @property
    def n(self):
        return self.Xs.shape[0]

    @property
    def d(self):
        return self.Xs.shape[1]

    @property
    def p(self):
        return self.Y.shape[1]


@dataclass(frozen=True)
class FittedModel:
    spec: KernelSpec
    filter: FilterSpec
    Xs: np.ndarray
    C: np.ndarray
    beta: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.Xs.shape[0]

    @property
    def d(self):
        return self.Xs.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    def predict(self, x):
        return predict(self, x)

    def predict_batch(self, X):
        return predict_batch(self, X)


def weighted_gram(K, beta):
    """``(1/n) B^{1/2} K B^{1/2}``, symmetrized."""
    n = K.shape[0]
    sb = np.sqrt(beta)
    M = (sb[:, None] * K * sb[None, :]) / n
    return 0.5 * (M + M.T)


def coefficient_matrix(K, Y, beta, filt: FilterSpec):
    """Return the ``p x n`` matrix ``C`` from a precomputed Gram matrix."""
    n = K.shape[0]
    sb = np.sqrt(beta)
    G = apply_filter_matrix(filt, weighted_gram(K, beta))
    A = (sb[:, None] * G * sb[None, :]) / n
    return Y.T @ A


def fit(ds: ShiftDataset, spec: KernelSpec, filter: FilterSpec, beta=None) -> FittedModel:
    """Fit the weighted spectral-filter predictor.

    ``beta`` defaults to ``ds.beta``; one of the two must be given.
    """
    if beta is None:
        if ds.beta is None:
            raise ValidationError("importance weights are required (pass beta or set ds.beta)")
        beta = ds.beta
    beta = as_weights(beta, ds.n)
    K = gram(spec, ds.Xs)
    C = coefficient_matrix(K, ds.Y, beta, filter)
    return FittedModel(spec=spec, filter=filter, Xs=ds.Xs, C=C, beta=beta)


def coefficient_path(K, Y, beta, filters):
    """``C`` for several filters from one eigendecomposition of the weighted Gram."""
    n = K.shape[0]
    sb = np.sqrt(beta)
    M = weighted_gram(K, beta)
    eig = sym_eig(M)
    w = clamp_spectrum(eig.values, float(np.trace(M)), n)
    left = (Y.T * sb[None, :]) @ eig.vectors
    right = eig.vectors.T * sb[None, :] / n
    return [(left * filter_value(f, w)[None, :]) @ right for f in filters]


def fit_path(ds: ShiftDataset, spec: KernelSpec, filters, beta):
    """Fit one model per filter, sharing the Gram matrix and its eigendecomposition."""
    beta = as_weights(beta, ds.n)
    K = gram(spec, ds.Xs)
    return [
        FittedModel(spec=spec, filter=f, Xs=ds.Xs, C=C, beta=beta)
        for f, C in zip(filters, coefficient_path(K, ds.Y, beta, filters))
    ]


def predict(model: FittedModel, x):
    x = as_vector(x, "x")
    check_same_dim(model.d, x.shape[0])
    return model.C @ cross_kernel_vector(model.spec, model.Xs, x)


def predict_batch(model: FittedModel, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2 and X.shape[0] == 0:
        check_same_dim(model.d, X.shape[1])
        return np.zeros((0, model.p))
    X = as_matrix(X, "X")
    check_same_dim(model.d, X.shape[1])
    return cross_gram(model.spec, X, model.Xs) @ model.C.T


def weighted_empirical_risk(model, ds: ShiftDataset, beta=None):
    """``(1/n) sum_i beta_i ||f(x_i) - y_i||^2`` over the source sample."""
    if beta is None:
        beta = ds.beta if ds.beta is not None else np.ones(ds.n)
    beta = as_weights(beta, ds.n)
    pred = model.predict_batch(ds.Xs)
    if pred.shape != ds.Y.shape:
        raise ValidationError(f"model output shape {pred.shape} != Y shape {ds.Y.shape}")
    res = ((pred - ds.Y) ** 2).sum(axis=1)
    return float(np.dot(beta, res) / ds.n)


class SpectralRegressor(RegressorMixin, BaseEstimator):
    """Importance-weighted kernel regressor with a spectral regularization filter.

    Parameters
    ----------
    kernel : str, default='gaussian'
        One of 'gaussian', 'cauchy', 'exponential', 'imq'.
    gamma : float, default=1e-2
        Kernel bandwidth.
    filter : str, default='tikhonov'
        One of 'tikhonov', 'iterated_tikhonov', 'cutoff'.
    lam : float, default=1e-3
        Regularization parameter.
    m : int, default=1
        Iteration count for iterated Tikhonov.

    Attributes
    ----------
    model_ : FittedModel
    coef_ : ndarray of shape (n_outputs, n_samples)
    """

    def __init__(self, kernel="gaussian", gamma=1e-2, filter="tikhonov", lam=1e-3, m=1):
        self.kernel = kernel
        self.gamma = gamma
        self.filter = filter
        self.lam = lam
        self.m = m

    def fit(self, X, y, sample_weight=None):
        X = as_matrix(X, "X")
        y_arr = np.asarray(y, dtype=np.float64)
        self._1d_y = y_arr.ndim == 1
        beta = np.ones(X.shape[0]) if sample_weight is None else sample_weight
        ds = ShiftDataset(Xs=X, Y=y_arr, Xt=X[:1])
        self.model_ = fit(ds, KernelSpec(self.kernel, self.gamma),
                          FilterSpec(self.filter, self.lam, self.m), beta)
        self.coef_ = self.model_.C
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        out = predict_batch(self.model_, X)
        return out[:, 0] if self._1d_y else out
