"""Spectral regularization filters and their application to symmetric matrices.

A filter ``g_lam`` approximates ``1/sigma`` on the nonnegative half-line. Three
families are provided::

    tikhonov            1 / (sigma + lam)
    iterated_tikhonov   (1 - (lam / (sigma + lam))**m) / sigma
    cutoff              1 / sigma if sigma >= lam else 0

Matrix filters go through a full symmetric eigendecomposition so that every
family shares one code path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._validation import ValidationError, as_matrix

FILTER_FAMILIES = ("tikhonov", "iterated_tikhonov", "cutoff")

SYMMETRY_RTOL = 1e-10
PSD_TOL = 1e-8


class NotPSDError(ValidationError):
    """A matrix expected to be positive semidefinite has a large negative eigenvalue."""


@dataclass(frozen=True)
class FilterSpec:
    """Regularization family, its parameter ``lam`` and (for iterated Tikhonov) ``m``."""

    family: str
    lam: float
    m: int = 1

    def __post_init__(self):
        family = str(self.family).lower()
        if family not in FILTER_FAMILIES:
            raise ValidationError(
                f"unknown filter family {self.family!r}; expected one of {FILTER_FAMILIES}"
            )
        lam = float(self.lam)
        if not np.isfinite(lam) or lam <= 0:
            raise ValidationError(f"filter lambda must be > 0, got {self.lam}")
        m = int(self.m)
        if m != self.m or m < 1:
            raise ValidationError(f"iteration count m must be a positive integer, got {self.m}")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "m", m)

    def with_lambda(self, lam):
        return FilterSpec(self.family, lam, self.m)

    @property
    def qualification(self):
        return {"tikhonov": 1.0, "iterated_tikhonov": float(self.m), "cutoff": np.inf}[
            self.family
        ]

    def to_dict(self):
        d = {"family": self.family, "lambda": self.lam}
        if self.family == "iterated_tikhonov":
            d["m"] = self.m
        return d

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(d["family"], d["lambda"], d.get("m", 1))
        except KeyError as exc:
            raise ValidationError(f"filter spec missing field {exc}") from None

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class EigenPair:
    """Eigenvalues in descending order and matching orthonormal eigenvector columns."""

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self):
        return (self.vectors * self.values) @ self.vectors.T


def _check_symmetric(M, name="M"):
    M = as_matrix(M, name)
    if M.shape[0] != M.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {M.shape}")
    scale = max(np.abs(M).max(), np.finfo(float).tiny)
    asym = np.abs(M - M.T).max()
    if asym > SYMMETRY_RTOL * scale:
        raise ValidationError(
            f"{name} is not symmetric (max |M - M^T| = {asym:.3e}, scale {scale:.3e})"
        )
    return M


def sym_eig(M) -> EigenPair:
    """Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.

    Ties keep the order LAPACK returns them in, reversed; filters act
    eigenvalue-wise so downstream results do not depend on it.
    """
    M = _check_symmetric(M)
    try:
        w, V = scipy.linalg.eigh(M, driver="evd", check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"symmetric eigensolver failed to converge on a {M.shape[0]}x{M.shape[0]} "
            f"matrix: {exc}"
        ) from exc
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - same class in recent scipy
        raise np.linalg.LinAlgError(str(exc)) from exc
    order = np.arange(w.shape[0])[::-1]
    return EigenPair(values=w[order], vectors=V[:, order])


def _check_sigma(sigma):
    s = np.asarray(sigma, dtype=np.float64)
    if np.any(~np.isfinite(s)) or np.any(s < 0):
        raise ValidationError("sigma must be finite and nonnegative")
    return s


def _filter_array(f: FilterSpec, s):
    lam = f.lam
    if f.family == "tikhonov":
        return 1.0 / (s + lam)
    if f.family == "cutoff":
        out = np.zeros_like(s)
        keep = s >= lam
        out[keep] = 1.0 / s[keep]
        return out
    # 1 - (lam/(s+lam))**m written as -expm1(-m*log1p(s/lam)) to keep
    # precision for s << lam; the s -> 0 limit is m/lam.
    out = np.full_like(s, f.m / lam)
    pos = s > 0
    sp = s[pos]
    out[pos] = -np.expm1(-f.m * np.log1p(sp / lam)) / sp
    return out


def filter_value(f: FilterSpec, sigma):
    """Evaluate ``g_lam(sigma)``; accepts a scalar or an array of sigmas."""
    s = _check_sigma(sigma)
    out = _filter_array(f, np.atleast_1d(s))
    return float(out[0]) if s.ndim == 0 else out


def residual_value(f: FilterSpec, sigma):
    """Evaluate ``1 - sigma * g_lam(sigma)``."""
    s = _check_sigma(sigma)
    s1 = np.atleast_1d(s)
    if f.family == "tikhonov":
        out = f.lam / (s1 + f.lam)
    elif f.family == "iterated_tikhonov":
        out = np.exp(-f.m * np.log1p(s1 / f.lam))
    else:
        out = np.where(s1 >= f.lam, 0.0, 1.0)
    return float(out[0]) if s.ndim == 0 else out


def clamp_spectrum(values, trace, n):
    """Zero out rounding-level negative eigenvalues, reject genuinely negative ones."""
    tol = PSD_TOL * max(trace, 0.0) / n
    low = values.min() if values.size else 0.0
    if low < -tol:
        raise NotPSDError(
            f"matrix is not positive semidefinite: eigenvalue {low:.3e} below -{tol:.3e}"
        )
    return np.maximum(values, 0.0)


def apply_filter_matrix(f: FilterSpec, M):
    """Return ``V diag(g_lam(w)) V^T`` for ``M = V diag(w) V^T`` symmetric PSD."""
    M = _check_symmetric(M)
    n = M.shape[0]
    eig = sym_eig(M)
    w = clamp_spectrum(eig.values, float(np.trace(M)), n)
    G = (eig.vectors * _filter_array(f, w)) @ eig.vectors.T
    return 0.5 * (G + G.T)


def tikhonov_solve(M, lam, rhs=None):
    """``(M + lam I)^{-1}`` (or its action on ``rhs``) by Cholesky.

    Kept independent of the eigendecomposition path as a cross-check.
    """
    M = _check_symmetric(M)
    A = M + lam * np.eye(M.shape[0])
    b = np.eye(M.shape[0]) if rhs is None else np.asarray(rhs, dtype=np.float64)
    return scipy.linalg.solve(A, b, assume_a="pos")
