"""Linear aggregation of fitted predictors and two-level multiple kernel learning.

Given members ``f_1..f_l`` fitted on the weighted source sample, the mixing
coefficients solve ``G c = g`` with importance-weighted empirical inner
products::

    G[j, k] = (1/n) sum_i beta_i <f_j(x_i), f_k(x_i)>
    g[j]    = (1/n) sum_i beta_i <y_i, f_j(x_i)>

Ill-conditioned members are withdrawn greedily before solving.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.model_selection import KFold
from sklearn.utils.validation import check_is_fitted

from ._validation import ValidationError, as_matrix, as_vector, as_weights, check_same_dim
from .estimator import ShiftDataset, fit_path
from .kernels import KernelSpec
from .spectral import FilterSpec

logger = logging.getLogger(__name__)

DEFAULT_COND_THRESHOLD = 1e8


class AggregationError(RuntimeError):
    """Raised when every member has to be withdrawn."""


@dataclass(frozen=True)
class AggregateModel:
    """Members (fitted or nested aggregates), coefficients over ``kept`` members."""

    members: tuple
    coeffs: np.ndarray
    kept: tuple
    cond: float
    label: str = ""

    @property
    def d(self):
        return self.members[0].d

    @property
    def p(self):
        return self.members[0].p

    def predict(self, x):
        return aggregate_predict(self, x)

    def predict_batch(self, X):
        X = as_matrix(X, "X")
        check_same_dim(self.d, X.shape[1])
        out = np.zeros((X.shape[0], self.p))
        for c, j in zip(self.coeffs, self.kept):
            out += c * self.members[j].predict_batch(X)
        return out

    def full_coeffs(self):
        """Coefficients over all members, zero for withdrawn ones."""
        c = np.zeros(len(self.members))
        c[list(self.kept)] = self.coeffs
        return c


def _check_members(models):
    if len(models) == 0:
        raise ValidationError("aggregation needs at least one member")
    d, p = models[0].d, models[0].p
    for j, m in enumerate(models[1:], 1):
        if m.d != d or m.p != p:
            raise ValidationError(
                f"member {j} has dims (d={m.d}, p={m.p}), expected (d={d}, p={p})"
            )


def system_from_predictions(preds, Y, beta):
    """Weighted Gram system from member predictions of shape ``(l, n, p)``."""
    preds = np.asarray(preds, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    l, n, _ = preds.shape
    if Y.shape != preds.shape[1:]:
        raise ValidationError(f"Y shape {Y.shape} does not match predictions {preds.shape[1:]}")
    beta = as_weights(beta, n)
    sb = np.sqrt(beta)[None, :, None]
    Z = (sb * preds).reshape(l, -1)
    G = (Z @ Z.T) / n
    # only the upper triangle is trusted; mirror it for exact symmetry
    G = np.triu(G) + np.triu(G, 1).T
    g = Z @ (np.sqrt(beta)[:, None] * Y).ravel() / n
    return G, g


def build_system(models, ds: ShiftDataset, beta=None):
    _check_members(models)
    check_same_dim(models[0].d, ds.d)
    if models[0].p != ds.p:
        raise ValidationError(f"member output dim {models[0].p} != data output dim {ds.p}")
    if beta is None:
        beta = ds.beta if ds.beta is not None else np.ones(ds.n)
    preds = np.stack([m.predict_batch(ds.Xs) for m in models])
    return system_from_predictions(preds, ds.Y, beta)


def condition_number(G):
    if G.shape[0] == 0:
        return np.inf
    s = np.linalg.svd(G, compute_uv=False)
    if s[-1] <= 0 or not np.isfinite(s[0]):
        return np.inf
    return float(s[0] / s[-1])


def solve_aggregation(G, g, cond_threshold=DEFAULT_COND_THRESHOLD):
    """Return ``(coeffs, kept, cond)`` after greedy withdrawal of members.

    While the retained system is worse conditioned than ``cond_threshold``,
    the member whose removal lowers the condition number most is dropped
    (lowest index on ties).
    """
    G = as_matrix(G, "G")
    g = as_vector(g, "g")
    l = G.shape[0]
    if G.shape != (l, l) or g.shape != (l,):
        raise ValidationError(f"incompatible system shapes {G.shape} and {g.shape}")
    if np.abs(G - G.T).max() > 1e-10 * max(np.abs(G).max(), np.finfo(float).tiny):
        raise ValidationError("aggregation Gram matrix is not symmetric")

    kept = list(range(l))
    cond = condition_number(G)
    while cond > cond_threshold:
        if len(kept) == 1:
            raise AggregationError(
                f"aggregation degenerate: every member withdrawn (last cond={cond:.3e})"
            )
        best_j, best_cond = None, np.inf
        for j in kept:
            rest = [k for k in kept if k != j]
            c = condition_number(G[np.ix_(rest, rest)])
            if best_j is None or c < best_cond:
                best_j, best_cond = j, c
        logger.debug("withdrawing member %d (cond %.3e -> %.3e)", best_j, cond, best_cond)
        kept.remove(best_j)
        cond = best_cond

    Gk = G[np.ix_(kept, kept)]
    coeffs = scipy.linalg.solve(Gk, g[kept], assume_a="sym")
    return coeffs, tuple(kept), cond


def aggregate(models, ds: ShiftDataset, beta=None, cond_threshold=DEFAULT_COND_THRESHOLD,
              label=""):
    """Build and solve the aggregation system, returning an :class:`AggregateModel`."""
    G, g = build_system(models, ds, beta)
    coeffs, kept, cond = solve_aggregation(G, g, cond_threshold)
    return AggregateModel(members=tuple(models), coeffs=coeffs, kept=kept, cond=cond,
                          label=label)


def aggregate_predict(am: AggregateModel, x):
    x = as_vector(x, "x")
    check_same_dim(am.d, x.shape[0])
    out = np.zeros(am.p)
    for c, j in zip(am.coeffs, am.kept):
        out += c * am.members[j].predict(x)
    return out


def _folds(n, cv, random_state):
    if cv is None:
        return None
    cv = int(cv)
    if cv < 2 or cv > n:
        raise ValidationError(f"cv must be between 2 and n={n}, got {cv}")
    return list(KFold(cv, shuffle=True, random_state=random_state).split(np.arange(n)))


def _kernel_stage(ds, spec, filters, beta, folds):
    """Full-data members for one kernel plus the predictions used for its system.

    Without folds the predictions are in-sample; with folds each point is
    predicted by members fitted on the other folds.
    """
    models = fit_path(ds, spec, filters, beta)
    if folds is None:
        preds = np.stack([m.predict_batch(ds.Xs) for m in models])
        return models, preds
    preds = np.zeros((len(filters), ds.n, ds.p))
    for train, test in folds:
        sub = ShiftDataset(Xs=ds.Xs[train], Y=ds.Y[train], Xt=ds.Xt)
        for j, m in enumerate(fit_path(sub, spec, filters, beta[train])):
            preds[j, test] = m.predict_batch(ds.Xs[test])
    return models, preds


def _combine(preds, coeffs, kept):
    return np.tensordot(coeffs, preds[list(kept)], axes=1)


def aggregate_lambdas(ds, spec: KernelSpec, lambda_grid, filter: FilterSpec, beta,
                      cond_threshold=DEFAULT_COND_THRESHOLD, cv=None, random_state=0):
    """Fit one model per lambda for a single kernel and aggregate them."""
    beta = as_weights(beta, ds.n)
    filters = [filter.with_lambda(lam) for lam in lambda_grid]
    models, preds = _kernel_stage(ds, spec, filters, beta, _folds(ds.n, cv, random_state))
    G, g = system_from_predictions(preds, ds.Y, beta)
    coeffs, kept, cond = solve_aggregation(G, g, cond_threshold)
    return AggregateModel(tuple(models), coeffs, kept, cond, label=spec.family)


def multi_kernel_learn(ds: ShiftDataset, kernel_specs, lambda_grid, filter: FilterSpec,
                       beta=None, cond_threshold=DEFAULT_COND_THRESHOLD, cv=None,
                       random_state=0) -> AggregateModel:
    """Aggregate over lambdas for each kernel, then aggregate the per-kernel results.

    ``cv=None`` estimates both aggregation systems on the training sample
    itself. An integer ``cv`` builds them from out-of-fold predictions
    instead, while the returned members are still fitted on all of ``ds``.
    """
    if len(kernel_specs) == 0:
        raise ValidationError("multiple kernel learning needs at least one kernel")
    if len(lambda_grid) == 0:
        raise ValidationError("multiple kernel learning needs at least one lambda")
    if beta is None:
        beta = ds.beta if ds.beta is not None else np.ones(ds.n)
    beta = as_weights(beta, ds.n)
    folds = _folds(ds.n, cv, random_state)
    filters = [filter.with_lambda(lam) for lam in lambda_grid]
    stage1, stage1_preds = [], []
    for spec in kernel_specs:
        models, preds = _kernel_stage(ds, spec, filters, beta, folds)
        G, g = system_from_predictions(preds, ds.Y, beta)
        coeffs, kept, cond = solve_aggregation(G, g, cond_threshold)
        stage1.append(AggregateModel(tuple(models), coeffs, kept, cond, label=spec.family))
        stage1_preds.append(_combine(preds, coeffs, kept))
    G, g = system_from_predictions(np.stack(stage1_preds), ds.Y, beta)
    coeffs, kept, cond = solve_aggregation(G, g, cond_threshold)
    return AggregateModel(tuple(stage1), coeffs, kept, cond, label="mkl")


def _coerce_kernel(k):
    if isinstance(k, KernelSpec):
        return k
    if isinstance(k, dict):
        return KernelSpec.from_dict(k)
    family, gamma = k
    return KernelSpec(family, gamma)


class AggregatedRegressor(RegressorMixin, BaseEstimator):
    """Two-level aggregate of spectral regressors over lambdas and kernels.

    Parameters
    ----------
    kernels : list, default=(('gaussian', 1e-2),)
        Kernel specs as ``(family, gamma)`` pairs, dicts or ``KernelSpec``.
    lambdas : sequence of float, default=10**-(2..7)
        Regularization parameters aggregated per kernel.
    filter : str, default='tikhonov'
    m : int, default=1
    cond_threshold : float, default=1e8
        Members are withdrawn until the aggregation system is better
        conditioned than this.
    cv : int or None, default=None
        Number of folds for out-of-fold aggregation systems; ``None`` uses
        in-sample predictions.
    random_state : int, default=0
        Seed of the fold shuffle.

    Attributes
    ----------
    model_ : AggregateModel
    """

    def __init__(self, kernels=(("gaussian", 1e-2),),
                 lambdas=(1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7),
                 filter="tikhonov", m=1, cond_threshold=DEFAULT_COND_THRESHOLD, cv=None,
                 random_state=0):
        self.kernels = kernels
        self.lambdas = lambdas
        self.filter = filter
        self.m = m
        self.cond_threshold = cond_threshold
        self.cv = cv
        self.random_state = random_state

    def fit(self, X, y, sample_weight=None):
        X = as_matrix(X, "X")
        y_arr = np.asarray(y, dtype=np.float64)
        self._1d_y = y_arr.ndim == 1
        ds = ShiftDataset(Xs=X, Y=y_arr, Xt=X[:1])
        beta = np.ones(X.shape[0]) if sample_weight is None else sample_weight
        specs = [_coerce_kernel(k) for k in self.kernels]
        self.model_ = multi_kernel_learn(ds, specs, list(self.lambdas),
                                         FilterSpec(self.filter, self.lambdas[0], self.m),
                                         beta, self.cond_threshold, self.cv,
                                         self.random_state)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        out = self.model_.predict_batch(X)
        return out[:, 0] if self._1d_y else out


__all__ = [
    "AggregateModel",
    "AggregatedRegressor",
    "AggregationError",
    "aggregate",
    "aggregate_lambdas",
    "aggregate_predict",
    "build_system",
    "condition_number",
    "multi_kernel_learn",
    "solve_aggregation",
    "system_from_predictions",
]
