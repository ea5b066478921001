"""Command-line entry point ``shiftkernel``.

Exit codes: 0 on success, 2 on validation errors, 1 on runtime errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from ._validation import ValidationError
from .aggregate import build_system, solve_aggregation
from .estimator import ShiftDataset, fit
from .experiments import (
    ExperimentConfig,
    run_kernel_aggregation,
    run_lambda_sweep,
    run_rate_check,
    write_outputs,
)
from .imaging import (
    Sinogram,
    blur_kernel,
    convolve2d,
    iradon,
    load_sinogram,
    radon,
    read_pgm,
    save_sinogram,
    write_pgm,
)
from .io import load_dataset, load_matrix, load_model, load_vector, save_dataset, save_matrix, save_model
from .kernels import KernelSpec, median_bandwidth
from .metrics import format_table, report
from .spectral import FilterSpec
from .synthetic import make_problem
from .weights import KuLSIF

logger = logging.getLogger("shiftkernel")


def _out(args, default=None):
    out = args.out or default
    if out is None:
        raise ValidationError("this subcommand needs --out")
    return Path(out)


def _config(args, **overrides):
    raw = json.loads(Path(args.config).read_text()) if args.config else {}
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.out:
        raw["output_dir"] = args.out
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(raw)


def _kernel(family, gamma, X=None):
    if gamma == "median":
        if X is None:
            raise ValidationError("median bandwidth needs data")
        return median_bandwidth(family, X)
    return KernelSpec(family, float(gamma))


# --------------------------------------------------------------------------- commands


def cmd_synth(args):
    seed = 0 if args.seed is None else args.seed
    prob, ds = make_problem(seed, args.n, args.m, d=args.d, p=args.p,
                            shift_strength=args.shift, noise_sd=args.noise)
    out = _out(args)
    save_dataset(ds, out)
    save_matrix(out / "Yt_true.csv", prob.fstar(ds.Xt))
    (out / "problem.json").write_text(json.dumps({
        "seed": seed, "n": args.n, "m": args.m, "d": args.d, "p": args.p,
        "shift_strength": args.shift, "noise_sd": args.noise,
        "generator_kernel": prob.kernel.to_dict(), "b_true": prob.b_true,
    }, indent=2))


def cmd_radon(args):
    sino = radon(read_pgm(args.image), args.n_ang, args.n_det)
    save_sinogram(sino, _out(args))


def cmd_iradon(args):
    h, w = args.size
    sino = load_sinogram(args.sinogram, image_shape=(h, w))
    write_pgm(iradon(sino, h, w), _out(args))


def cmd_blur(args):
    K = blur_kernel(args.kernel)
    if args.image:
        img = read_pgm(args.image)
        write_pgm(convolve2d(img.pixels, K), _out(args))
    else:
        sino = load_sinogram(args.sinogram, image_shape=args.size)
        save_sinogram(Sinogram(convolve2d(sino.data, K), sino.angles, sino.spacing), _out(args))


def cmd_kulsif(args):
    Xs, Xt = load_matrix(args.source), load_matrix(args.target)
    spec = _kernel(args.kernel, args.gamma, np.vstack([Xs, Xt]))
    est = KuLSIF(spec.family, spec.gamma, alpha=args.alpha).fit(Xs, Xt)
    if args.out:
        save_matrix(args.out, est.weights_)
    else:
        np.savetxt(sys.stdout, est.weights_[:, None], delimiter=",", fmt="%.17g")
    print(f"alpha={est.alpha_:.17g}")


def _weights(args, ds: ShiftDataset):
    w = args.weights
    if w == "uniform":
        return np.ones(ds.n)
    if w == "exact":
        if ds.beta is None:
            raise ValidationError("--weights exact needs beta.csv in the dataset bundle")
        return ds.beta
    if w == "kulsif":
        spec = _kernel("gaussian", "median", np.vstack([ds.Xs, ds.Xt]))
        return KuLSIF(spec.family, spec.gamma).fit(ds.Xs, ds.Xt).weights_
    return load_vector(w)


def cmd_fit(args):
    ds = load_dataset(args.data)
    spec = _kernel(args.kernel, args.gamma, ds.Xs)
    model = fit(ds, spec, FilterSpec(args.filter, args.lam, args.m), _weights(args, ds))
    save_model(model, _out(args))


def cmd_predict(args):
    model = load_model(args.model)
    save_matrix(_out(args), model.predict_batch(load_matrix(args.inputs)))


def cmd_aggregate(args):
    manifest_path = Path(args.manifest)
    manifest = json.loads(manifest_path.read_text())
    base = manifest_path.parent
    try:
        models = [load_model(base / m) for m in manifest["models"]]
        Xs = load_matrix(base / manifest["inputs"])
        Y = load_matrix(base / manifest["outputs"])
        beta = load_vector(base / manifest["weights"])
    except KeyError as exc:
        raise ValidationError(f"manifest lacks field {exc}") from None
    ds = ShiftDataset(Xs=Xs, Y=Y, Xt=Xs[:1], beta=beta)
    G, g = build_system(models, ds, beta)
    coeffs, kept, cond = solve_aggregation(G, g, args.cond_threshold)
    out = _out(args, base)
    out.mkdir(parents=True, exist_ok=True)
    (out / "coeffs.json").write_text(json.dumps(
        {"kept": list(kept), "coeffs": [float(c) for c in coeffs], "cond": cond}, indent=2))


def cmd_metrics(args):
    def load(p):
        p = Path(p)
        return load_matrix(p / "predictions.csv" if p.is_dir() else p)

    rep = report(load(args.pred), load(args.truth), peak=args.peak)
    print(json.dumps(rep.to_dict()))
    print(format_table([(args.label, rep)], label="Item"), end="")


def cmd_sweep(args):
    cfg = _config(args, mode=args.mode, blur=args.blur)
    res = run_lambda_sweep(cfg)
    print(res.text("Lambda"), end="")
    if cfg.output_dir:
        write_outputs(res, cfg.output_dir, "lambda_sweep", "Lambda")


def cmd_mkl(args):
    cfg = _config(args, mode=args.mode, blur=args.blur)
    res = run_kernel_aggregation(cfg)
    print(res.text("Kernel"), end="")
    if cfg.output_dir:
        write_outputs(res, cfg.output_dir, "kernel_aggregation", "Kernel")


def cmd_ratecheck(args):
    cfg = _config(args)
    rep = run_rate_check(cfg)
    text = json.dumps(rep.to_dict(), indent=2)
    print(text)
    if cfg.output_dir:
        Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
        (Path(cfg.output_dir) / "ratecheck.json").write_text(text)


# --------------------------------------------------------------------------- parser


def build_parser():
    def globals_(default):
        # subcommands must not reset flags given before the subcommand name
        g = argparse.ArgumentParser(add_help=False)
        g.add_argument("--config", default=default, help="experiment config JSON")
        g.add_argument("--seed", type=int, default=default)
        g.add_argument("--out", default=default, help="output file or directory")
        g.add_argument("--threads", type=int, default=default, help="BLAS thread limit")
        g.add_argument("-v", "--verbose", action="store_true",
                       default=False if default is None else default)
        return g

    common = globals_(argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="shiftkernel", parents=[globals_(None)],
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth, "write a synthetic covariate-shift dataset bundle")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--m", type=int, default=200)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--p", type=int, default=3)
    p.add_argument("--shift", type=float, default=0.5)
    p.add_argument("--noise", type=float, default=0.1)

    p = add("radon", cmd_radon, "sinogram of a PGM image")
    p.add_argument("image")
    p.add_argument("--n-ang", type=int, default=60)
    p.add_argument("--n-det", type=int, default=95)

    p = add("iradon", cmd_iradon, "filtered backprojection of a sinogram CSV")
    p.add_argument("sinogram")
    p.add_argument("--size", type=int, nargs=2, required=True, metavar=("H", "W"))

    p = add("blur", cmd_blur, "blur a PGM image or a sinogram CSV")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--image")
    g.add_argument("--sinogram")
    p.add_argument("--kernel", choices=["gaussian", "motion"], default="gaussian")
    p.add_argument("--size", type=int, nargs=2, metavar=("H", "W"))

    p = add("kulsif", cmd_kulsif, "importance weights from source/target CSVs")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--kernel", default="gaussian")
    p.add_argument("--gamma", default="0.01", help="bandwidth or 'median'")
    p.add_argument("--alpha", type=float, help="fixed alpha (default: quasi-optimality)")

    p = add("fit", cmd_fit, "fit a weighted spectral-filter model")
    p.add_argument("data", help="dataset bundle directory")
    p.add_argument("--kernel", default="gaussian")
    p.add_argument("--gamma", default="median")
    p.add_argument("--filter", default="tikhonov")
    p.add_argument("--lam", type=float, default=1e-3)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--weights", default="kulsif",
                   help="'kulsif', 'exact', 'uniform' or a weights CSV")

    p = add("predict", cmd_predict, "predict with a saved model")
    p.add_argument("model")
    p.add_argument("inputs")

    p = add("aggregate", cmd_aggregate, "aggregate saved models listed in a manifest")
    p.add_argument("manifest")
    p.add_argument("--cond-threshold", type=float, default=1e8)

    p = add("metrics", cmd_metrics, "MSE / Rel. Err. / PSNR between two CSVs")
    p.add_argument("pred")
    p.add_argument("truth")
    p.add_argument("--peak", type=float, default=1.0)
    p.add_argument("--label", default="pred")

    for name, func, help_ in (("sweep", cmd_sweep, "lambda sweep table"),
                              ("mkl", cmd_mkl, "kernel aggregation table")):
        p = add(name, func, help_)
        p.add_argument("--mode", choices=["blur_sinogram", "blur_faces"])
        p.add_argument("--blur", choices=["gaussian", "motion"])

    add("ratecheck", cmd_ratecheck, "empirical learning-rate slope on synthetic data")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with threadpool_limits(limits=args.threads):
            args.func(args)
    except (ValidationError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - top-level reporting
        logger.debug("runtime failure", exc_info=True)
        print(f"error ({args.command}): {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
