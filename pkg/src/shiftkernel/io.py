"""CSV bundles for datasets and fitted models.

A model directory holds ``meta.json`` (kernel, filter, n, d, p), ``C.csv``,
``Xs.csv`` and ``beta.csv``. A dataset bundle holds ``Xs.csv``, ``Y.csv``,
``Xt.csv`` and optionally ``beta.csv``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ._validation import ValidationError
from .estimator import FittedModel, ShiftDataset
from .kernels import KernelSpec
from .spectral import FilterSpec

FMT = "%.17g"


def save_matrix(path, A):
    A = np.asarray(A, dtype=np.float64)
    np.savetxt(path, A.reshape(A.shape[0], -1) if A.ndim > 1 else A[:, None],
               delimiter=",", fmt=FMT)


def load_matrix(path):
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"missing file {path}")
    return np.loadtxt(path, delimiter=",", ndmin=2)


def load_vector(path):
    A = load_matrix(path)
    if A.shape[1] != 1 and A.shape[0] != 1:
        raise ValidationError(f"{path} holds a {A.shape} matrix, expected a vector")
    return A.ravel()


def save_dataset(ds: ShiftDataset, directory):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    save_matrix(d / "Xs.csv", ds.Xs)
    save_matrix(d / "Y.csv", ds.Y)
    save_matrix(d / "Xt.csv", ds.Xt)
    if ds.beta is not None:
        save_matrix(d / "beta.csv", ds.beta)


def load_dataset(directory) -> ShiftDataset:
    d = Path(directory)
    beta = load_vector(d / "beta.csv") if (d / "beta.csv").exists() else None
    return ShiftDataset(Xs=load_matrix(d / "Xs.csv"), Y=load_matrix(d / "Y.csv"),
                        Xt=load_matrix(d / "Xt.csv"), beta=beta)


def save_model(model: FittedModel, directory):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    meta = {"kernel": model.spec.to_dict(), "filter": model.filter.to_dict(),
            "n": model.n, "d": model.d, "p": model.p}
    (d / "meta.json").write_text(json.dumps(meta, indent=2))
    save_matrix(d / "C.csv", model.C)
    save_matrix(d / "Xs.csv", model.Xs)
    save_matrix(d / "beta.csv", model.beta)


def load_model(directory) -> FittedModel:
    d = Path(directory)
    meta_path = d / "meta.json"
    if not meta_path.exists():
        raise ValidationError(f"{d} is not a model directory (no meta.json)")
    meta = json.loads(meta_path.read_text())
    C = load_matrix(d / "C.csv")
    Xs = load_matrix(d / "Xs.csv")
    beta = load_vector(d / "beta.csv")
    if C.shape != (meta["p"], meta["n"]) or Xs.shape != (meta["n"], meta["d"]):
        raise ValidationError(f"model files in {d} disagree with meta.json {meta}")
    return FittedModel(spec=KernelSpec.from_dict(meta["kernel"]),
                       filter=FilterSpec.from_dict(meta["filter"]), Xs=Xs, C=C, beta=beta)
