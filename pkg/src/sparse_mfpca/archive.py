"""JSON persistence of fitted multivariate models.

Floats are written with their shortest round-trip ``repr`` so every stored
number reloads bit-exactly. Eigenfunctions are not stored; they are rebuilt
from the raw optimizer parameters with the same arithmetic as during fitting,
so reloaded models evaluate identically.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .estimators import MultivariateFPCA, UnivariateFPCA
from .exceptions import DataFormatError
from .grid_basis import build_grid, eval_basis
from .mean_smooth import MeanModel
from .mfpca import MultivariateModel
from .scoring import ScoreMatrix
from .ufpca import UnivariateParams, model_from_params

FORMAT_VERSION = 1


def _arr(a):
    return np.asarray(a, dtype=float).tolist()


def _basis_from_config(cfg):
    grid = build_grid(tuple(cfg["domain"]), int(cfg["grid_size"]))
    return eval_basis(cfg["kind"], int(cfg["count"]), grid.domain, grid, int(cfg["order"]))


def _scores_to_dict(sm: ScoreMatrix):
    return {
        "values": _arr(sm.values),
        "subject_ids": list(sm.subject_ids),
        "variable": sm.variable,
        "underdetermined": [bool(x) for x in sm.underdetermined],
    }


def _scores_from_dict(d, M):
    values = np.array(d["values"], dtype=float).reshape(len(d["subject_ids"]), M)
    return ScoreMatrix(values, list(d["subject_ids"]), d["variable"], np.array(d["underdetermined"], dtype=bool))


def _univariate_to_dict(est: UnivariateFPCA, scores: ScoreMatrix):
    m = est.model_
    if not isinstance(est.mean_, MeanModel):
        raise TypeError("only models with a fitted mean can be archived")
    return {
        "basis": m.basis.config(),
        "domain": list(est.domain_),
        "params": {"beta": _arr(m.params.beta), "eta": _arr(m.params.eta), "gamma": float(m.params.gamma)},
        "eigenvalues": _arr(m.eigenvalues),
        "noise_variance": float(m.noise_variance),
        "nll": float(m.nll),
        "aic": None if m.aic is None else float(m.aic),
        "n_subjects": int(m.n_subjects),
        "converged": bool(m.converged),
        "n_iter": int(m.n_iter),
        "candidates": m.candidates,
        "mean": {"basis": est.mean_.basis.config(), "coeffs": _arr(est.mean_.coeffs),
                 "smoothing": float(est.mean_.smoothing)},
        "scores": _scores_to_dict(scores),
    }


def _univariate_from_dict(d, params: dict):
    basis = _basis_from_config(d["basis"])
    U, M = basis.count, len(d["params"]["eta"])
    p = UnivariateParams(np.array(d["params"]["beta"], dtype=float).reshape(U, M),
                         np.array(d["params"]["eta"], dtype=float), float(d["params"]["gamma"]))
    mean = MeanModel(_basis_from_config(d["mean"]["basis"]), np.array(d["mean"]["coeffs"], dtype=float),
                     float(d["mean"]["smoothing"]))
    model = model_from_params(p, basis, d["nll"], d["n_subjects"], mean=mean,
                              converged=d["converged"], n_iter=d["n_iter"])
    model.aic = d["aic"]
    model.candidates = d["candidates"]
    model.scores = _scores_from_dict(d["scores"], M)
    est = UnivariateFPCA(**params)
    est.model_ = model
    est.mean_ = mean
    est.domain_ = tuple(d["domain"])
    est.eigenvalues_ = model.eigenvalues
    est.eigenfunctions_ = model.eigenfunctions
    est.noise_variance_ = model.noise_variance
    est.n_components_ = model.n_components
    est.n_basis_ = model.n_basis
    est.aic_ = model.aic
    est.scores_ = model.scores.values
    return est


def _jsonable_params(params: dict):
    out = {}
    for k, v in params.items():
        if isinstance(v, (tuple, range, np.ndarray)):
            v = list(np.asarray(v).tolist())
        if callable(v):
            raise TypeError(f"parameter {k!r} is not serializable")
        out[k] = v
    return out


def to_dict(est: MultivariateFPCA, provenance=None) -> dict:
    """Serializable representation of a fitted :class:`MultivariateFPCA`."""
    mv: MultivariateModel = est.model_
    return {
        "format_version": FORMAT_VERSION,
        "params": _jsonable_params(est.get_params()),
        "variables": list(mv.variables),
        "univariate": [
            _univariate_to_dict(u, sm) for u, sm in zip(est.univariate_estimators_, mv.univariate_scores)
        ],
        "multivariate": {
            "Z": _arr(mv.Z),
            "eigenvalues": _arr(mv.eigenvalues),
            "eigenvectors": _arr(mv.eigenvectors),
            "M": int(mv.M),
            "weights": _arr(mv.weights),
            "subject_ids": list(mv.subject_ids),
            "scores": _arr(mv.scores),
        },
        "provenance": provenance or {},
    }


def from_dict(d: dict) -> MultivariateFPCA:
    version = d.get("format_version")
    if version != FORMAT_VERSION:
        raise DataFormatError(f"unsupported model format_version {version!r}; expected {FORMAT_VERSION}")
    params = dict(d["params"])
    est = MultivariateFPCA(**params)
    uni_params = {
        "basis": params["basis"], "n_basis": params["n_basis"],
        "n_components": params["n_components_univariate"], "n_grid": params["n_grid"],
        "mean": params["mean"], "random_state": params["random_state"],
        "gtol": params["gtol"], "ftol": params["ftol"], "max_iter": params["max_iter"],
    }
    est.univariate_estimators_ = [_univariate_from_dict(u, uni_params) for u in d["univariate"]]
    est.univariate_ = [u.model_ for u in est.univariate_estimators_]
    m = d["multivariate"]
    P = sum(u.n_components for u in est.univariate_)
    model = MultivariateModel(
        univariate=est.univariate_,
        Z=np.array(m["Z"], dtype=float).reshape(P, P),
        eigenvalues=np.array(m["eigenvalues"], dtype=float),
        eigenvectors=np.array(m["eigenvectors"], dtype=float).reshape(P, P),
        M=int(m["M"]),
        weights=np.array(m["weights"], dtype=float),
        variables=list(d["variables"]),
        subject_ids=list(m["subject_ids"]),
        scores=np.array(m["scores"], dtype=float).reshape(len(m["subject_ids"]), int(m["M"])),
        univariate_scores=[u.scores for u in est.univariate_],
    )
    est.model_ = model
    est.variables_ = list(d["variables"])
    est.domains_ = [u.domain_ for u in est.univariate_estimators_]
    est.eigenvalues_ = model.mv_eigenvalues
    est.n_components_ = model.M
    est.scores_ = model.scores
    est.provenance_ = d.get("provenance", {})
    return est


def save_model(est: MultivariateFPCA, path, provenance=None) -> None:
    Path(path).write_text(json.dumps(to_dict(est, provenance), indent=1) + "\n", encoding="utf-8")


def load_model(path) -> MultivariateFPCA:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: not a model archive ({exc})") from None
    if not isinstance(d, dict):
        raise DataFormatError(f"{path}: not a model archive")
    return from_dict(d)
