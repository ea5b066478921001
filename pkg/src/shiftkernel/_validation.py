"""Input validation helpers shared by the estimators and functional API."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array


class ValidationError(ValueError):
    """Raised when user input violates a documented precondition."""


def as_matrix(X, name="X", allow_empty=False):
    """Return ``X`` as a finite float64 2-D array."""
    try:
        arr = check_array(
            X,
            dtype=np.float64,
            ensure_2d=True,
            ensure_min_samples=0 if allow_empty else 1,
            ensure_all_finite=True,
            input_name=name,
        )
    except ValueError as exc:
        raise ValidationError(f"{name}: {exc}") from exc
    return arr


def as_vector(x, name="x"):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def as_outputs(Y, n, name="Y"):
    """Outputs as an ``(n, p)`` matrix; a 1-D vector is read as ``p = 1``."""
    arr = np.asarray(Y, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    arr = as_matrix(arr, name=name)
    if arr.shape[0] != n:
        raise ValidationError(f"{name} has {arr.shape[0]} rows, expected {n}")
    return arr


def as_weights(beta, n, name="beta"):
    """Nonnegative weight vector of length ``n``."""
    arr = as_vector(beta, name=name)
    if arr.shape[0] != n:
        raise ValidationError(f"{name} has length {arr.shape[0]}, expected {n}")
    if np.any(arr < 0):
        raise ValidationError(f"{name} must be nonnegative")
    return arr


def check_same_dim(d1, d2, what="input dimension"):
    if d1 != d2:
        raise ValidationError(f"{what} mismatch: {d1} != {d2}")


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValidationError(f"{name} must be a positive finite number, got {value}")
    return value
