"""Reconstruction error metrics, empirical effective dimension and rate slopes."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ._validation import ValidationError, check_positive
from .spectral import _check_symmetric, clamp_spectrum, sym_eig


@dataclass(frozen=True)
class MetricReport:
    mse: float
    rel_err: float
    psnr: float
    n_items: int

    def to_dict(self):
        return asdict(self)


def _pair(pred, truth):
    pred = np.atleast_2d(np.asarray(pred, dtype=np.float64))
    truth = np.atleast_2d(np.asarray(truth, dtype=np.float64))
    if pred.shape != truth.shape:
        raise ValidationError(f"shape mismatch: pred {pred.shape} vs truth {truth.shape}")
    return pred, truth


def mse(pred, truth):
    pred, truth = _pair(pred, truth)
    return float(np.mean((pred - truth) ** 2))


def rel_err(pred, truth):
    """Mean over items (rows) of ``||pred_i - truth_i|| / ||truth_i||``."""
    pred, truth = _pair(pred, truth)
    norms = np.linalg.norm(truth, axis=1)
    if np.any(norms == 0):
        raise ValidationError("relative error undefined for a zero-norm truth item")
    return float(np.mean(np.linalg.norm(pred - truth, axis=1) / norms))


def psnr(mse_value, peak=1.0):
    """Peak signal-to-noise ratio in dB."""
    if mse_value == 0:
        raise ValidationError("infinite PSNR: mse is zero")
    mse_value = check_positive(mse_value, "mse")
    peak = check_positive(peak, "peak")
    return 10.0 * math.log10(peak**2 / mse_value)


def report(pred, truth, peak=1.0) -> MetricReport:
    pred, truth = _pair(pred, truth)
    m = mse(pred, truth)
    return MetricReport(
        mse=m,
        rel_err=rel_err(pred, truth),
        psnr=psnr(m, peak) if m > 0 else math.inf,
        n_items=pred.shape[0],
    )


def effective_dimension(K, lam):
    """``sum_i w_i / (w_i + lam)`` over the eigenvalues ``w_i`` of ``K / n``."""
    lam = check_positive(lam, "lambda")
    K = _check_symmetric(K, "K")
    n = K.shape[0]
    w = clamp_spectrum(sym_eig(K / n).values, float(np.trace(K)) / n, n)
    return float(np.sum(w / (w + lam)))


def rate_slope(ns, errors):
    """Least-squares slope of ``log(error)`` against ``log(n)``."""
    ns = np.asarray(ns, dtype=np.float64)
    errors = np.asarray(errors, dtype=np.float64)
    if ns.shape[0] < 3 or ns.shape != errors.shape:
        raise ValidationError("rate_slope needs at least 3 matching (n, error) points")
    if np.any(np.diff(ns) <= 0):
        raise ValidationError("ns must be strictly increasing")
    if np.any(errors <= 0):
        raise ValidationError("errors must be positive")
    x = np.log(ns)
    y = np.log(errors)
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def format_table(rows, label="Lambda"):
    """Aligned text table in MSE / Rel. Err. / PSNR column order.

    ``rows`` is a sequence of ``(label, MetricReport)``.
    """
    lines = [f"{label:<12}{'MSE':>12}{'Rel. Err.':>12}{'PSNR':>9}"]
    for name, r in rows:
        lines.append(f"{name:<12}{r.mse:>12.6f}{r.rel_err:>12.4f}{r.psnr:>9.2f}")
    return "\n".join(lines) + "\n"


def table_csv(rows, label="lambda"):
    lines = [f"{label},mse,rel_err,psnr"]
    for name, r in rows:
        lines.append(f"{name},{r.mse:.10g},{r.rel_err:.10g},{r.psnr:.10g}")
    return "\n".join(lines) + "\n"


__all__ = [
    "MetricReport",
    "effective_dimension",
    "format_table",
    "mse",
    "psnr",
    "rate_slope",
    "rel_err",
    "report",
    "table_csv",
]
