"""Importance-weighted spectral-filter kernel regression under covariate shift."""

from ._validation import ValidationError
from .aggregate import (
    AggregatedRegressor,
    AggregateModel,
    AggregationError,
    aggregate,
    aggregate_lambdas,
    aggregate_predict,
    build_system,
    multi_kernel_learn,
    solve_aggregation,
)
from .estimator import (
    FittedModel,
    ShiftDataset,
    SpectralRegressor,
    fit,
    predict,
    predict_batch,
    weighted_empirical_risk,
)
from .imaging import (
    GrayImage,
    Sinogram,
    convolve2d,
    gaussian_blur_kernel,
    iradon,
    motion_blur_kernel,
    radon,
    read_pgm,
    write_pgm,
)
from .kernels import KernelSpec, cross_kernel_vector, eval_kernel, gram
from .metrics import MetricReport, effective_dimension, mse, psnr, rate_slope, rel_err
from .spectral import EigenPair, FilterSpec, apply_filter_matrix, filter_value, residual_value, sym_eig
from .synthetic import SyntheticProblem, l2_target_error, make_problem
from .weights import KuLSIF, WeightEstimate, kulsif_weights, select_alpha_quasi_opt, sqrt_weight_matrix

__version__ = "0.1.0"

__all__ = [
    "AggregateModel",
    "AggregatedRegressor",
    "AggregationError",
    "EigenPair",
    "FilterSpec",
    "FittedModel",
    "GrayImage",
    "KernelSpec",
    "KuLSIF",
    "MetricReport",
    "ShiftDataset",
    "Sinogram",
    "SpectralRegressor",
    "SyntheticProblem",
    "ValidationError",
    "WeightEstimate",
    "aggregate",
    "aggregate_lambdas",
    "aggregate_predict",
    "apply_filter_matrix",
    "build_system",
    "convolve2d",
    "cross_kernel_vector",
    "effective_dimension",
    "eval_kernel",
    "filter_value",
    "fit",
    "gaussian_blur_kernel",
    "gram",
    "iradon",
    "kulsif_weights",
    "l2_target_error",
    "make_problem",
    "motion_blur_kernel",
    "mse",
    "multi_kernel_learn",
    "predict",
    "predict_batch",
    "psnr",
    "radon",
    "rate_slope",
    "read_pgm",
    "rel_err",
    "residual_value",
    "select_alpha_quasi_opt",
    "solve_aggregation",
    "sqrt_weight_matrix",
    "sym_eig",
    "weighted_empirical_risk",
    "write_pgm",
]
