"""Importance weights by kernel unconstrained least-squares importance fitting.

The density ratio at the source points solves ``(K + alpha n I) beta = F``
with ``F_j = (n/m) sum_i k(x'_i, x_j)``, where ``x'`` are target inputs.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import ValidationError, as_matrix, as_vector, check_positive, check_same_dim
from .kernels import KernelSpec, cross_gram, gram

logger = logging.getLogger(__name__)

DEFAULT_KERNEL = KernelSpec("gaussian", 1e-2)
DEFAULT_B_CAP = 1e6


def default_alpha_grid(n_points=10, start=1.0, ratio=4.0):
    """Geometric grid ``start * ratio**-j`` for ``j = 0 .. n_points-1``."""
    return start * ratio ** -np.arange(n_points, dtype=np.float64)


@dataclass(frozen=True)
class WeightEstimate:
    """Clipped weights ``beta``, the unclipped solve ``raw_beta`` and ``alpha`` used."""

    beta: np.ndarray
    alpha: float
    raw_beta: np.ndarray


def _target_vector(spec, Xs, Xt):
    n, m = Xs.shape[0], Xt.shape[0]
    return (n / m) * cross_gram(spec, Xt, Xs).sum(axis=0)


def _solve(K, F, alpha):
    n = K.shape[0]
    A = K + alpha * n * np.eye(n)
    try:
        return scipy.linalg.solve(A, F, assume_a="pos")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise np.linalg.LinAlgError(f"KuLSIF system is singular for alpha={alpha}") from exc


def _prepare(spec, Xs, Xt):
    Xs = as_matrix(Xs, "Xs")
    Xt = as_matrix(Xt, "Xt")
    check_same_dim(Xs.shape[1], Xt.shape[1], "source/target column count")
    return Xs, Xt, gram(spec, Xs), _target_vector(spec, Xs, Xt)


def clip_weights(raw_beta, b_cap=DEFAULT_B_CAP):
    """Clip to ``[0, b_cap]``, warning when the upper bound is hit."""
    if np.any(raw_beta > b_cap):
        warnings.warn(
            f"{int(np.sum(raw_beta > b_cap))} importance weights exceed b_cap={b_cap:g} "
            "and were clipped; the density ratio looks unbounded",
            RuntimeWarning,
            stacklevel=3,
        )
    return np.clip(raw_beta, 0.0, b_cap)


def kulsif_weights(spec: KernelSpec, Xs, Xt, alpha, b_cap=DEFAULT_B_CAP) -> WeightEstimate:
    alpha = check_positive(alpha, "alpha")
    Xs, Xt, K, F = _prepare(spec, Xs, Xt)
    raw = _solve(K, F, alpha)
    return WeightEstimate(beta=clip_weights(raw, b_cap), alpha=alpha, raw_beta=raw)


def _quasi_opt_index(solutions):
    diffs = [np.linalg.norm(b1 - b0) for b0, b1 in zip(solutions[:-1], solutions[1:])]
    # np.argmin returns the first minimizer, which is the lowest-index tie-break.
    return int(np.argmin(diffs)), np.asarray(diffs)


def _check_grid(grid):
    grid = as_vector(grid, "alpha grid")
    if grid.shape[0] < 2:
        raise ValidationError("quasi-optimality needs an alpha grid with at least 2 entries")
    if np.any(grid <= 0) or np.any(np.diff(grid) >= 0):
        raise ValidationError("alpha grid must be positive and strictly decreasing")
    return grid


def select_alpha_quasi_opt(spec: KernelSpec, Xs, Xt, grid=None):
    """Quasi-optimal ``alpha``: the grid point ``alpha_j`` minimizing
    ``||beta(alpha_{j+1}) - beta(alpha_j)||`` over consecutive pairs."""
    grid = _check_grid(default_alpha_grid() if grid is None else grid)
    Xs, Xt, K, F = _prepare(spec, Xs, Xt)
    sols = [_solve(K, F, a) for a in grid]
    j, diffs = _quasi_opt_index(sols)
    logger.debug("quasi-optimality differences %s -> alpha=%g", diffs, grid[j])
    return float(grid[j])


def sqrt_weight_matrix(w) -> np.ndarray:
    """Diagonal of ``B^{1/2}`` for a weight estimate (or a plain weight vector)."""
    beta = w.beta if isinstance(w, WeightEstimate) else np.asarray(w, dtype=np.float64)
    return np.sqrt(beta)


class KuLSIF(BaseEstimator):
    """Density-ratio estimator returning importance weights at the source points.

    Parameters
    ----------
    kernel : str, default='gaussian'
        Kernel family used for the ratio model.
    gamma : float, default=1e-2
        Kernel bandwidth.
    alpha : float or None, default=None
        Regularization parameter. ``None`` selects it from ``alpha_grid`` by
        the quasi-optimality rule.
    alpha_grid : array-like or None, default=None
        Strictly decreasing grid; defaults to ``4**-j`` for ``j = 0..9``.
    b_cap : float, default=1e6
        Upper clip applied to the weights.

    Attributes
    ----------
    alpha_ : float
        Regularization parameter used for the final weights.
    weights_ : ndarray of shape (n_samples,)
        Clipped importance weights at the source points.
    raw_weights_ : ndarray of shape (n_samples,)
        Unclipped solution of the linear system.
    """

    def __init__(self, kernel="gaussian", gamma=1e-2, alpha=None, alpha_grid=None,
                 b_cap=DEFAULT_B_CAP):
        self.kernel = kernel
        self.gamma = gamma
        self.alpha = alpha
        self.alpha_grid = alpha_grid
        self.b_cap = b_cap

    def fit(self, X, X_target):
        spec = KernelSpec(self.kernel, self.gamma)
        if self.alpha is None:
            grid = _check_grid(default_alpha_grid() if self.alpha_grid is None
                               else self.alpha_grid)
            X, X_target, K, F = _prepare(spec, X, X_target)
            sols = [_solve(K, F, a) for a in grid]
            j, _ = _quasi_opt_index(sols)
            alpha, raw = float(grid[j]), sols[j]
        else:
            alpha = check_positive(self.alpha, "alpha")
            raw = kulsif_weights(spec, X, X_target, alpha, self.b_cap).raw_beta
        self.alpha_ = alpha
        self.raw_weights_ = raw
        self.weights_ = clip_weights(raw, self.b_cap)
        self.n_features_in_ = np.asarray(X).shape[1]
        return self

    def fit_transform(self, X, X_target):
        return self.fit(X, X_target).weights_

    @property
    def estimate_(self) -> WeightEstimate:
        check_is_fitted(self, "weights_")
        return WeightEstimate(self.weights_, self.alpha_, self.raw_weights_)
