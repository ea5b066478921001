"""Scalar positive-definite kernels, Gram matrices and cross-kernel vectors.

Four radial families are supported. With ``r2 = ||x - t||^2``:

=============  ===================================
gaussian       ``exp(-gamma * r2)``
cauchy         ``1 / (1 + r2 / gamma**2)``
exponential    ``exp(-sqrt(r2) / gamma**2)``
imq            ``(gamma**2 + r2) ** -0.5``
=============  ===================================

Squared distances are summed coordinate-wise (no ``|x|^2 + |t|^2 - 2 x.t``
expansion) unless ``fast=True`` is requested.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from ._validation import ValidationError, as_matrix, as_vector, check_same_dim

FAMILIES = ("gaussian", "cauchy", "exponential", "imq")


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family plus its bandwidth ``gamma``."""

    family: str
    gamma: float

    def __post_init__(self):
        family = str(self.family).lower()
        if family not in FAMILIES:
            raise ValidationError(
                f"unknown kernel family {self.family!r}; expected one of {FAMILIES}"
            )
        gamma = float(self.gamma)
        if not np.isfinite(gamma) or gamma <= 0:
            raise ValidationError(f"kernel gamma must be > 0, got {self.gamma}")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "gamma", gamma)

    @property
    def diagonal(self) -> float:
        """Value of ``k(x, x)``, which is also the bound ``kappa**2``."""
        if self.family == "imq":
            return 1.0 / self.gamma
        return 1.0

    def to_dict(self):
        return {"family": self.family, "gamma": self.gamma}

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(d["family"], d["gamma"])
        except KeyError as exc:
            raise ValidationError(f"kernel spec missing field {exc}") from None

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _profile(spec: KernelSpec, r2):
    """Apply the radial profile of ``spec`` to squared distances."""
    g = spec.gamma
    if spec.family == "gaussian":
        return np.exp(-g * r2)
    if spec.family == "cauchy":
        return 1.0 / (1.0 + r2 / g**2)
    if spec.family == "exponential":
        return np.exp(-np.sqrt(r2) / g**2)
    return 1.0 / np.sqrt(g**2 + r2)


def sq_distances(A, B, fast=False):
    """Pairwise squared Euclidean distances between rows of ``A`` and ``B``."""
    if not fast:
        return cdist(A, B, metric="sqeuclidean")
    d = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d, 0.0)


def eval_kernel(spec: KernelSpec, x, t) -> float:
    x = as_vector(x, "x")
    t = as_vector(t, "t")
    check_same_dim(x.shape[0], t.shape[0])
    diff = x - t
    return float(_profile(spec, float(np.dot(diff, diff))))


def gram(spec: KernelSpec, X, fast=False):
    """Gram matrix ``K[i, j] = k(X[i], X[j])``.

    The result is exactly symmetric with the family's diagonal value on the
    diagonal.
    """
    X = as_matrix(X, "X")
    n = X.shape[0]
    if fast:
        r2 = sq_distances(X, X, fast=True)
        r2 = 0.5 * (r2 + r2.T)
        np.fill_diagonal(r2, 0.0)
    elif n == 1:
        r2 = np.zeros((1, 1))
    else:
        r2 = squareform(pdist(X, metric="sqeuclidean"))
    return _profile(spec, r2)


def cross_gram(spec: KernelSpec, A, B, fast=False):
    """Matrix ``k(A[i], B[j])`` of shape ``(len(A), len(B))``."""
    A = as_matrix(A, "A", allow_empty=True)
    B = as_matrix(B, "B", allow_empty=True)
    check_same_dim(A.shape[1], B.shape[1])
    return _profile(spec, sq_distances(A, B, fast=fast))


def cross_kernel_vector(spec: KernelSpec, X, x):
    """Vector ``(k(x, X[0]), ..., k(x, X[n-1]))``."""
    X = as_matrix(X, "X")
    x = as_vector(x, "x")
    check_same_dim(X.shape[1], x.shape[0])
    diff = X - x[None, :]
    return _profile(spec, np.einsum("ij,ij->i", diff, diff))


def median_bandwidth(family, X):
    """Bandwidth from the median pairwise squared distance of ``X``.

    Chosen so that a pair at the median distance has a kernel value of
    ``exp(-1)`` (gaussian, exponential) or ``1/2`` (cauchy), and the imq
    profile halves at the same radius scale.
    """
    X = as_matrix(X, "X")
    if X.shape[0] < 2:
        raise ValidationError("median bandwidth needs at least two rows")
    med = float(np.median(pdist(X, metric="sqeuclidean")))
    if med <= 0:
        raise ValidationError("median pairwise distance is zero")
    family = str(family).lower()
    if family == "gaussian":
        return KernelSpec(family, 1.0 / med)
    if family == "exponential":
        return KernelSpec(family, med**0.25)
    if family in ("cauchy", "imq"):
        return KernelSpec(family, np.sqrt(med))
    raise ValidationError(f"unknown kernel family {family!r}")
