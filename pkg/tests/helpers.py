"""Shared, cached experiment runs used by several test modules."""

from functools import lru_cache

import numpy as np

from shiftkernel.aggregate import build_system, multi_kernel_learn
from shiftkernel.experiments import DEFAULT_LAMBDAS
from shiftkernel.kernels import KernelSpec
from shiftkernel.metrics import rate_slope
from shiftkernel.spectral import FilterSpec
from shiftkernel.synthetic import l2_target_error, make_problem, polynomial_members
from shiftkernel.weights import KuLSIF

AGG_KERNELS = (KernelSpec("gaussian", 5.0), KernelSpec("cauchy", 0.5),
               KernelSpec("exponential", 0.7), KernelSpec("imq", 0.5))
RATE_NS = (100, 400, 1600)

ACCEPTANCE_LINES = {}


def record(number, title, passed, detail):
    """Remember and print a one-line verdict for an acceptance criterion."""
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}: {title} ({detail})"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


@lru_cache(maxsize=None)
def aggregation_trial(seed, n=400, n_mc=5000):
    """Errors of the final aggregate, the per-kernel aggregates and all members."""
    prob, ds = make_problem(seed, n, n, shift_strength=0.5, noise_sd=0.1)
    beta = KuLSIF().fit(ds.Xs, ds.Xt).weights_
    am = multi_kernel_learn(ds, AGG_KERNELS, DEFAULT_LAMBDAS, FilterSpec("tikhonov", 1e-2),
                            beta, cv=5, random_state=seed)
    err = lambda f: l2_target_error(f, prob, n_mc, seed)  # noqa: E731
    per_kernel = [err(m) for m in am.members]
    members = [err(mm) for m in am.members for mm in m.members]
    return err(am), per_kernel, members


@lru_cache(maxsize=None)
def gram_errors(seed, count=4):
    """``||G~ - G||_op`` at each n in RATE_NS with exactly known G."""
    errs = []
    for n in RATE_NS:
        prob, ds = make_problem(seed, n, 10, shift_strength=0.5)
        members, G = polynomial_members(prob, count)
        Gt, _ = build_system(members, ds, ds.beta)
        errs.append(float(np.linalg.norm(Gt - G, 2)))
    return tuple(errs)


def gram_slope(seed):
    return rate_slope(RATE_NS, gram_errors(seed))


@lru_cache(maxsize=None)
def rate_report():
    """Default rate check: 10 seeds, exact weights, Tikhonov with lam = n**(-2/3)."""
    from shiftkernel.experiments import ExperimentConfig, run_rate_check
    return run_rate_check(ExperimentConfig())


SMALL_IMAGE_CONFIG = {"n": 100, "m": 100, "image_size": 32, "radon": {"n_ang": 30, "n_det": 46}}


@lru_cache(maxsize=None)
def small_image_problem(seed, mode="blur_sinogram", blur="gaussian"):
    from shiftkernel.experiments import ExperimentConfig, build_image_problem
    cfg = ExperimentConfig.from_dict({**SMALL_IMAGE_CONFIG, "seed": seed, "mode": mode,
                                      "blur": blur})
    return cfg, build_image_problem(cfg)


@lru_cache(maxsize=None)
def desk_image_problem(seed):
    """Image problem at the default desk scale (n = m = 200, 64 x 64)."""
    from shiftkernel.experiments import ExperimentConfig, build_image_problem
    return build_image_problem(ExperimentConfig(seed=seed))
