"""Configuration-driven experiments: deblurring from sinograms and rate checks.

Two modes mirror the image setup:

``blur_sinogram``
    source inputs are clean sinograms, target inputs are sinograms convolved
    with the blur kernel.
``blur_faces``
    target images are blurred first, then projected.

In both modes source and target images are disjoint subsets of the corpus and
the regression target is the clean image.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import zoom

from ._validation import ValidationError
from .aggregate import aggregate_lambdas, multi_kernel_learn
from .estimator import ShiftDataset, fit_path
from .imaging import (
    Sinogram,
    blur_kernel,
    convolve2d,
    decode_pnm,
    iradon,
    radon,
)
from .kernels import FAMILIES, KernelSpec, median_bandwidth
from .metrics import MetricReport, format_table, rate_slope, report, table_csv
from .spectral import FILTER_FAMILIES, FilterSpec
from .synthetic import l2_target_error, make_problem
from .weights import KuLSIF, default_alpha_grid

logger = logging.getLogger(__name__)

DEFAULT_LAMBDAS = [10.0 ** (-j - 1) for j in range(1, 7)]
MODES = ("blur_sinogram", "blur_faces")


class ConfigError(ValidationError):
    """Invalid experiment configuration (reported before any computation)."""


def _err(field_name, msg):
    raise ConfigError(f"config field '{field_name}': {msg}")


@dataclass
class ExperimentConfig:
    mode: str = "blur_sinogram"
    blur: str = "gaussian"
    n: int = 200
    m: int = 200
    kernels: list = field(default_factory=lambda: [{"family": "gaussian", "gamma": "median"}])
    lambda_grid: list = field(default_factory=lambda: list(DEFAULT_LAMBDAS))
    filter: dict = field(default_factory=lambda: {"family": "tikhonov"})
    kulsif: dict = field(default_factory=lambda: {
        "kernel": {"family": "gaussian", "gamma": "median"},
        "alpha_grid": default_alpha_grid().tolist(),
    })
    weights: str = "kulsif"
    radon: dict = field(default_factory=lambda: {"n_ang": 60, "n_det": 95})
    image_size: int = 64
    corpus: str | None = None
    corpus_size: int | None = None
    aggregation: dict = field(default_factory=lambda: {"cv": 5, "cond_threshold": 1e8})
    rate: dict = field(default_factory=lambda: {
        "ns": [100, 400, 1600], "seeds": 10, "d": 2, "p": 3, "noise_sd": 0.1,
        "shift_strength": 0.5, "n_mc": 20000,
    })
    seed: int = 0
    output_dir: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.mode not in MODES:
            _err("mode", f"must be one of {MODES}, got {self.mode!r}")
        try:
            blur_kernel(self.blur)
        except ValidationError as exc:
            _err("blur", str(exc))
        for name in ("n", "m", "image_size"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                _err(name, f"must be a positive integer, got {v!r}")
        if not isinstance(self.kernels, list) or len(self.kernels) == 0:
            _err("kernels", "must list at least one kernel")
        for i, k in enumerate(self.kernels):
            self._check_kernel(f"kernels[{i}]", k)
        lams = self.lambda_grid
        if not isinstance(lams, list) or len(lams) == 0:
            _err("lambda_grid", "must be a non-empty list")
        if any(not isinstance(x, (int, float)) or x <= 0 for x in lams):
            _err("lambda_grid", "entries must be positive numbers")
        if any(b >= a for a, b in zip(lams[:-1], lams[1:])):
            _err("lambda_grid", "must be strictly decreasing")
        if self.filter.get("family") not in FILTER_FAMILIES:
            _err("filter.family", f"must be one of {FILTER_FAMILIES}")
        if int(self.filter.get("m", 1)) < 1:
            _err("filter.m", "must be >= 1")
        if self.weights not in ("kulsif", "uniform"):
            _err("weights", "must be 'kulsif' or 'uniform'")
        self._check_kernel("kulsif.kernel", self.kulsif.get("kernel", {}))
        grid = self.kulsif.get("alpha_grid", [])
        if len(grid) < 2 or any(b >= a for a, b in zip(grid[:-1], grid[1:])) or min(grid) <= 0:
            _err("kulsif.alpha_grid", "needs >= 2 positive, strictly decreasing values")
        for key in ("n_ang", "n_det"):
            v = self.radon.get(key)
            if not isinstance(v, int) or v < 1:
                _err(f"radon.{key}", f"must be a positive integer, got {v!r}")
        if self.corpus is not None and not Path(self.corpus).is_dir():
            _err("corpus", f"directory {self.corpus!r} does not exist")
        if self.corpus_size is not None and self.corpus_size < self.n + self.m:
            _err("corpus_size", f"must be >= n + m = {self.n + self.m}")
        cv = self.aggregation.get("cv")
        if cv is not None and (not isinstance(cv, int) or cv < 2):
            _err("aggregation.cv", "must be null or an integer >= 2")
        if float(self.aggregation.get("cond_threshold", 1e8)) <= 1:
            _err("aggregation.cond_threshold", "must exceed 1")
        ns = self.rate.get("ns", [])
        if len(ns) < 3 or any(b <= a for a, b in zip(ns[:-1], ns[1:])):
            _err("rate.ns", "needs >= 3 strictly increasing sample sizes")
        if int(self.rate.get("seeds", 1)) < 1:
            _err("rate.seeds", "must be >= 1")

    @staticmethod
    def _check_kernel(name, k):
        if not isinstance(k, dict) or k.get("family") not in FAMILIES:
            _err(name, f"needs a 'family' among {FAMILIES}")
        g = k.get("gamma", "median")
        if g != "median" and (not isinstance(g, (int, float)) or g <= 0):
            _err(f"{name}.gamma", "must be a positive number or 'median'")

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        base = cls()
        merged = asdict(base)
        for key, value in d.items():
            if isinstance(merged.get(key), dict) and isinstance(value, dict):
                merged[key] = {**merged[key], **value}
            else:
                merged[key] = value
        return cls(**merged)

    @classmethod
    def load(cls, path):
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None

    def filter_spec(self, lam):
        return FilterSpec(self.filter["family"], lam, int(self.filter.get("m", 1)))


def resolve_kernel(k, X):
    if k.get("gamma", "median") == "median":
        return median_bandwidth(k["family"], X)
    return KernelSpec(k["family"], k["gamma"])


# --------------------------------------------------------------------------- corpus


def _supersampled_disk(yy, xx, cy, cx, ry, rx):
    return (((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2) <= 1.0


def face_phantom(rng, size=64, supersample=4):
    """Random face-like phantom: head ellipse with eyes, nose and mouth, in ``[0, 1]``."""
    s = size * supersample
    coords = (np.arange(s) + 0.5) / supersample - 0.5
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    c = (size - 1) / 2.0
    u = size / 64.0
    cy, cx = c + rng.normal(0, 1.5) * u, c + rng.normal(0, 1.5) * u
    ry, rx = rng.uniform(21, 26) * u, rng.uniform(15, 20) * u
    img = rng.uniform(0.55, 0.8) * _supersampled_disk(yy, xx, cy, cx, ry, rx)
    eye_y = cy - ry * rng.uniform(0.2, 0.35)
    eye_dx = rx * rng.uniform(0.35, 0.5)
    eye_r = rng.uniform(2.0, 3.5) * u
    for sign in (-1, 1):
        eye = _supersampled_disk(yy, xx, eye_y + rng.normal(0, 0.5) * u, cx + sign * eye_dx,
                                 eye_r, eye_r * rng.uniform(1.0, 1.4))
        img = np.where(eye, rng.uniform(0.1, 0.25), img)
    nose = _supersampled_disk(yy, xx, cy + ry * 0.05, cx, ry * rng.uniform(0.15, 0.25), 2.0 * u)
    img = np.where(nose, rng.uniform(0.85, 1.0), img)
    mouth = _supersampled_disk(yy, xx, cy + ry * rng.uniform(0.4, 0.55), cx,
                               rng.uniform(1.5, 3.0) * u, rx * rng.uniform(0.3, 0.55))
    img = np.where(mouth, rng.uniform(0.2, 0.4), img)
    img = img.reshape(size, supersample, size, supersample).mean(axis=(1, 3))
    return np.clip(img, 0.0, 1.0)


def synthetic_corpus(count, size=64, seed=0):
    rng = np.random.default_rng(seed)
    return np.stack([face_phantom(rng, size) for _ in range(count)])


def load_corpus(directory, size):
    paths = sorted(p for p in Path(directory).iterdir()
                   if p.suffix.lower() in (".pgm", ".ppm", ".pnm"))
    if not paths:
        raise ValidationError(f"no PGM/PPM images in {directory}")
    images = []
    for p in paths:
        px = decode_pnm(p.read_bytes())
        if px.shape != (size, size):
            px = np.clip(zoom(px, (size / px.shape[0], size / px.shape[1]), order=1), 0, 1)
        images.append(px)
    return np.stack(images)


# --------------------------------------------------------------------------- pipeline


@dataclass
class ImageProblem:
    ds: ShiftDataset
    target_images: np.ndarray
    target_sinograms: list
    image_shape: tuple


def build_image_problem(cfg: ExperimentConfig) -> ImageProblem:
    need = cfg.n + cfg.m
    if cfg.corpus is None:
        images = synthetic_corpus(cfg.corpus_size or need, cfg.image_size, cfg.seed)
    else:
        images = load_corpus(cfg.corpus, cfg.image_size)
    if images.shape[0] < need:
        raise ValidationError(f"corpus has {images.shape[0]} images, need n + m = {need}")
    order = np.random.default_rng(cfg.seed + 1).permutation(images.shape[0])
    src, tgt = images[order[: cfg.n]], images[order[cfg.n : need]]
    n_ang, n_det = cfg.radon["n_ang"], cfg.radon["n_det"]
    K = blur_kernel(cfg.blur)

    Xs = np.stack([radon(im, n_ang, n_det).data.ravel() for im in src])
    sinos = []
    for im in tgt:
        if cfg.mode == "blur_sinogram":
            s = radon(im, n_ang, n_det)
            s = Sinogram(convolve2d(s.data, K), s.angles, s.spacing)
        else:
            s = radon(convolve2d(im, K), n_ang, n_det)
        sinos.append(s)
    Xt = np.stack([s.data.ravel() for s in sinos])
    ds = ShiftDataset(Xs=Xs, Y=src.reshape(cfg.n, -1), Xt=Xt)
    return ImageProblem(ds, tgt.reshape(cfg.m, -1), sinos, src.shape[1:])


def estimate_weights(cfg: ExperimentConfig, ds: ShiftDataset):
    if cfg.weights == "uniform":
        return np.ones(ds.n), None
    spec = resolve_kernel(cfg.kulsif["kernel"], np.vstack([ds.Xs, ds.Xt]))
    est = KuLSIF(spec.family, spec.gamma, alpha_grid=cfg.kulsif["alpha_grid"]).fit(ds.Xs, ds.Xt)
    logger.info("KuLSIF alpha=%g, mean weight %.4f", est.alpha_, est.weights_.mean())
    return est.weights_, est.alpha_


def _score(pred, truth):
    return report(np.clip(pred, 0.0, 1.0), truth)


@dataclass
class SweepResult:
    rows: list
    baseline: MetricReport
    alpha: float | None
    kept: tuple
    coeffs: np.ndarray

    def text(self, label="Lambda"):
        out = format_table(self.rows, label)
        return out + f"# baseline iradon: mse={self.baseline.mse:.6f} psnr={self.baseline.psnr:.2f}\n"

    def csv(self, label="lambda"):
        return table_csv(self.rows, label)


def iradon_baseline(prob: ImageProblem):
    h, w = prob.image_shape
    recon = np.stack([iradon(s, h, w).pixels.ravel() for s in prob.target_sinograms])
    return _score(recon, prob.target_images)


def _agg_opts(cfg):
    return {"cond_threshold": float(cfg.aggregation.get("cond_threshold", 1e8)),
            "cv": cfg.aggregation.get("cv"), "random_state": cfg.seed}


def run_lambda_sweep(cfg: ExperimentConfig, prob: ImageProblem | None = None) -> SweepResult:
    """One row per lambda (grid order) followed by the lambda-aggregate row."""
    prob = prob or build_image_problem(cfg)
    ds = prob.ds
    beta, alpha = estimate_weights(cfg, ds)
    spec = resolve_kernel(cfg.kernels[0], ds.Xs)
    filters = [cfg.filter_spec(lam) for lam in cfg.lambda_grid]
    rows = []
    for f, model in zip(filters, fit_path(ds, spec, filters, beta)):
        rows.append((f"{f.lam:.0e}", _score(model.predict_batch(ds.Xt), prob.target_images)))
    am = aggregate_lambdas(ds, spec, cfg.lambda_grid, filters[0], beta, **_agg_opts(cfg))
    rows.append(("Agg.", _score(am.predict_batch(ds.Xt), prob.target_images)))
    return SweepResult(rows, iradon_baseline(prob), alpha, am.kept, am.coeffs)


def run_kernel_aggregation(cfg: ExperimentConfig, prob: ImageProblem | None = None):
    """One row per kernel (its lambda-aggregate) followed by the kernel-aggregate row."""
    prob = prob or build_image_problem(cfg)
    ds = prob.ds
    beta, alpha = estimate_weights(cfg, ds)
    specs = [resolve_kernel(k, ds.Xs) for k in cfg.kernels]
    final = multi_kernel_learn(ds, specs, cfg.lambda_grid, cfg.filter_spec(cfg.lambda_grid[0]),
                               beta, **_agg_opts(cfg))
    rows = [(m.label.capitalize() if m.label != "imq" else "IMQ",
             _score(m.predict_batch(ds.Xt), prob.target_images)) for m in final.members]
    rows.append(("Agg.", _score(final.predict_batch(ds.Xt), prob.target_images)))
    return SweepResult(rows, iradon_baseline(prob), alpha, final.kept, final.coeffs)


@dataclass
class RateReport:
    ns: list
    errors: list
    slopes: list
    median_slope: float
    degenerate: bool

    def to_dict(self):
        return asdict(self)


def _slope_or_nan(ns, errs, tol=1e-12):
    if min(errs) <= tol:
        return math.nan
    return rate_slope(ns, errs)


def run_rate_check(cfg: ExperimentConfig, predictor_factory=None) -> RateReport:
    """Target L2 error of Tikhonov fits with ``lam = n**(-2/3)`` and exact weights.

    ``predictor_factory(problem, dataset, n)`` can replace the fitted estimator;
    a slope is reported as NaN (flagged degenerate) when an error vanishes.
    """
    r = cfg.rate
    ns = list(r["ns"])
    errors, slopes = [], []
    for k in range(int(r.get("seeds", 10))):
        seed = cfg.seed + k
        errs = []
        for n in ns:
            prob, ds = make_problem(seed, n, n, d=int(r.get("d", 2)), p=int(r.get("p", 3)),
                                    shift_strength=float(r.get("shift_strength", 0.5)),
                                    noise_sd=float(r.get("noise_sd", 0.1)))
            if predictor_factory is None:
                f = FilterSpec(cfg.filter["family"], n ** (-2.0 / 3.0),
                               int(cfg.filter.get("m", 1)))
                predictor = fit_path(ds, prob.kernel, [f], ds.beta)[0]
            else:
                predictor = predictor_factory(prob, ds, n)
            errs.append(l2_target_error(predictor, prob, int(r.get("n_mc", 20000)), seed))
        errors.append(errs)
        slopes.append(_slope_or_nan(ns, errs))
    finite = [s for s in slopes if not math.isnan(s)]
    med = float(np.median(finite)) if finite else math.nan
    return RateReport(ns, errors, slopes, med, degenerate=not finite)


def write_outputs(result: SweepResult, out_dir, stem, label):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{stem}.txt").write_text(result.text(label))
    (out / f"{stem}.csv").write_text(result.csv(label.lower()))
    (out / f"{stem}.json").write_text(json.dumps({
        "rows": [{"label": name, **r.to_dict()} for name, r in result.rows],
        "baseline_iradon": result.baseline.to_dict(),
        "kulsif_alpha": result.alpha,
        "kept": list(result.kept),
        "coeffs": [float(c) for c in result.coeffs],
    }, indent=2))
