"""Synthetic covariate-shift problems with a known regression function and ratio.

The source marginal is uniform on ``[0, 1]^d``, viewed as an equal mixture of
``n_bins`` slabs along the first coordinate. The target marginal reweights the
slabs, so the density ratio is piecewise constant and known exactly. The
regression function is a finite combination of kernel sections and thus lies
in the hypothesis space of the generator kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import ValidationError, as_matrix
from .estimator import ShiftDataset
from .kernels import KernelSpec, cross_gram

DEFAULT_GENERATOR_KERNEL = KernelSpec("gaussian", 5.0)


def _rng(seed, stream):
    ss = np.random.SeedSequence([int(seed), int(stream)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SyntheticProblem:
    seed: int
    d: int
    p: int
    shift_strength: float
    noise_sd: float
    kernel: KernelSpec
    anchors: np.ndarray = field(repr=False)
    loadings: np.ndarray = field(repr=False)
    bin_edges: np.ndarray = field(repr=False)
    target_bin_weights: np.ndarray = field(repr=False)

    @property
    def n_bins(self):
        return self.target_bin_weights.shape[0]

    @property
    def b_true(self):
        return float(self.target_bin_weights.max() * self.n_bins)

    def _bin_index(self, X):
        idx = np.searchsorted(self.bin_edges, X[:, 0], side="right") - 1
        return np.clip(idx, 0, self.n_bins - 1)

    def beta_exact(self, X):
        """Density ratio ``q_X / p_X``; zero outside the unit cube."""
        X = as_matrix(X, "X")
        beta = self.target_bin_weights[self._bin_index(X)] * self.n_bins
        inside = np.all((X >= 0) & (X <= 1), axis=1)
        return np.where(inside, beta, 0.0)

    def fstar(self, X):
        """True regression function evaluated row-wise, shape ``(t, p)``."""
        X = as_matrix(X, "X", allow_empty=True)
        return cross_gram(self.kernel, X, self.anchors) @ self.loadings

    def sample_source(self, n, rng):
        return rng.random((n, self.d))

    def sample_target(self, n, rng):
        k = rng.choice(self.n_bins, size=n, p=self.target_bin_weights)
        X = rng.random((n, self.d))
        lo, hi = self.bin_edges[k], self.bin_edges[k + 1]
        X[:, 0] = lo + (hi - lo) * X[:, 0]
        return X

    def noise(self, n, rng):
        eps = rng.normal(0.0, self.noise_sd, size=(n, self.p))
        cap = 3.0 * self.noise_sd * np.sqrt(self.p)
        norms = np.linalg.norm(eps, axis=1)
        scale = np.where(norms > cap, cap / np.maximum(norms, 1e-300), 1.0)
        return eps * scale[:, None]

    def target_moment(self, power):
        """Exact ``E_q[x_1 ** power]``."""
        a = float(power)
        lo, hi = self.bin_edges[:-1], self.bin_edges[1:]
        per_bin = (hi ** (a + 1) - lo ** (a + 1)) / ((a + 1) * (hi - lo))
        return float(np.dot(self.target_bin_weights, per_bin))


def make_problem(seed, n, m, d=2, p=3, shift_strength=0.5, noise_sd=0.1, kernel=None,
                 n_anchors=10, n_bins=4):
    """Draw a problem and a :class:`ShiftDataset` with exact weights attached.

    Deterministic in ``seed``.
    """
    if n < 1 or m < 1:
        raise ValidationError("n and m must be >= 1")
    if d < 1 or p < 1 or n_anchors < 1 or n_bins < 1:
        raise ValidationError("d, p, n_anchors and n_bins must be >= 1")
    if not 0.0 <= shift_strength <= 1.0:
        raise ValidationError("shift_strength must lie in [0, 1]")
    if noise_sd < 0:
        raise ValidationError("noise_sd must be nonnegative")
    kernel = DEFAULT_GENERATOR_KERNEL if kernel is None else kernel

    rng = _rng(seed, 0)
    anchors = rng.random((n_anchors, d))
    amps = rng.normal(size=n_anchors)
    dirs = rng.normal(size=(n_anchors, p))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    tilt = np.linspace(-0.8, 0.8, n_bins) if n_bins > 1 else np.zeros(1)
    weights = (1.0 + shift_strength * tilt) / n_bins
    prob = SyntheticProblem(
        seed=int(seed), d=d, p=p, shift_strength=float(shift_strength),
        noise_sd=float(noise_sd), kernel=kernel, anchors=anchors,
        loadings=amps[:, None] * dirs, bin_edges=np.linspace(0.0, 1.0, n_bins + 1),
        target_bin_weights=weights / weights.sum(),
    )
    src, tgt = _rng(seed, 1), _rng(seed, 2)
    Xs = prob.sample_source(n, src)
    Y = prob.fstar(Xs)
    if noise_sd > 0:
        Y = Y + prob.noise(n, src)
    Xt = prob.sample_target(m, tgt)
    return prob, ShiftDataset(Xs=Xs, Y=Y, Xt=Xt, beta=prob.beta_exact(Xs))


def _as_callable(predictor):
    if hasattr(predictor, "predict_batch"):
        return predictor.predict_batch
    if hasattr(predictor, "predict"):
        return predictor.predict
    return predictor


def l2_target_error_stats(predictor, prob: SyntheticProblem, n_mc, seed):
    """Return ``(error, se_of_squared_error_mean, mean_squared_error)``."""
    if n_mc < 1:
        raise ValidationError("n_mc must be >= 1")
    X = prob.sample_target(n_mc, _rng(seed, 3))
    pred = np.asarray(_as_callable(predictor)(X), dtype=np.float64).reshape(n_mc, prob.p)
    sq = ((pred - prob.fstar(X)) ** 2).sum(axis=1)
    mean = float(sq.mean())
    se = float(sq.std(ddof=1) / np.sqrt(n_mc)) if n_mc > 1 else np.inf
    return float(np.sqrt(mean)), se, mean


def l2_target_error(predictor, prob: SyntheticProblem, n_mc=20000, seed=0):
    """Monte-Carlo ``||f - fstar||`` in ``L2(q_X)``."""
    return l2_target_error_stats(predictor, prob, n_mc, seed)[0]


@dataclass(frozen=True)
class PolynomialMember:
    """Fixed predictor ``x -> x_1**power * direction`` with closed-form target moments."""

    power: int
    direction: np.ndarray
    d: int

    @property
    def p(self):
        return self.direction.shape[0]

    def predict_batch(self, X):
        X = as_matrix(X, "X")
        return (X[:, 0] ** self.power)[:, None] * self.direction[None, :]

    def predict(self, x):
        return self.predict_batch(np.asarray(x, dtype=np.float64)[None, :])[0]


def polynomial_members(prob: SyntheticProblem, count, seed=0):
    """Members independent of any sample, plus their exact ``L2(q_X)`` Gram matrix."""
    rng = _rng(seed, 4)
    dirs = rng.normal(size=(count, prob.p))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    members = [PolynomialMember(j, dirs[j], prob.d) for j in range(count)]
    G = np.array([[dirs[j] @ dirs[k] * prob.target_moment(j + k) for k in range(count)]
                  for j in range(count)])
    return members, G
