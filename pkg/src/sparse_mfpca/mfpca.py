"""Multivariate principal components from stacked univariate scores.

Univariate scores of all variables are stacked column-wise, their sample
covariance ``Z`` is eigendecomposed, and the eigenvectors recombine the
univariate eigenfunctions and scores into multivariate ones. Optional
positive variable weights ``w_k`` scale each score block by ``sqrt(w_k)``;
eigenfunction blocks are then divided by ``sqrt(w_k)`` so the multivariate
eigenfunctions are orthonormal under the weighted inner product and the
truncated expansion reproduces the data.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .exceptions import AlignmentError
from .scoring import ScoreMatrix

CUMULATIVE_VARIANCE = 0.9
LINEARITY_TOL = 0.1


def _check_weights(weights, p) -> np.ndarray:
    w = np.ones(p) if weights is None else np.asarray(weights, dtype=float).ravel()
    if w.shape != (p,):
        raise ValueError(f"expected {p} variable weights, got {w.shape[0]}")
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("variable weights must be positive")
    return w


def _aligned(scores: Sequence[ScoreMatrix]):
    if not scores:
        raise ValueError("need at least one score matrix")
    ids = list(scores[0].subject_ids)
    for sm in scores[1:]:
        if list(sm.subject_ids) != ids:
            raise AlignmentError("score matrices do not share the same subjects in the same order")
    return ids


def stack_scores(scores: Sequence[ScoreMatrix], weights=None) -> np.ndarray:
    """Column-stack score blocks, block ``k`` scaled by ``sqrt(w_k)``."""
    _aligned(scores)
    w = _check_weights(weights, len(scores))
    return np.hstack([np.sqrt(wk) * sm.values for wk, sm in zip(w, scores)])


def build_Z(scores: Sequence[ScoreMatrix], weights=None) -> np.ndarray:
    """Sample covariance (divisor ``n - 1``) of the weighted stacked scores."""
    S = stack_scores(scores, weights)
    n = S.shape[0]
    if n < 2:
        raise ValueError("need at least two subjects to form a covariance")
    D = S - S.mean(axis=0)
    Z = D.T @ D / (n - 1)
    return (Z + Z.T) / 2


def eigen_Z(Z):
    """Eigenvalues (descending, clipped at 0) and orthonormal eigenvectors of ``Z``.

    Each eigenvector is signed so its largest-magnitude entry is positive.
    """
    Z = np.asarray(Z, dtype=float)
    vals, vecs = np.linalg.eigh((Z + Z.T) / 2)
    order = np.argsort(vals, kind="stable")[::-1]
    vals, vecs = vals[order], vecs[:, order]
    if np.any(vals < -1e-8):
        warnings.warn(f"Z has negative eigenvalues down to {vals.min():.3e}; clipped to 0", RuntimeWarning)
    vals = np.clip(vals, 0.0, None)
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vals, vecs * signs


def cumulative_variance_select(eigenvalues, fraction: float = CUMULATIVE_VARIANCE) -> int:
    """Smallest ``M`` whose leading eigenvalues explain ``fraction`` of the total."""
    d = np.asarray(eigenvalues, dtype=float)
    total = d.sum()
    if total <= 0:
        return 1
    cum = np.cumsum(d) / total
    return int(np.argmax(cum >= fraction - 1e-12) + 1)


def elbow_select(eigenvalues) -> int:
    """Truncation by the elbow of a descending spectrum.

    Picks the index whose point lies farthest from the chord joining the
    first and last points of the index/value plot. Falls back to
    :func:`cumulative_variance_select` when the spectrum is too close to a
    straight line for an elbow to mean anything.
    """
    d = np.asarray(eigenvalues, dtype=float).ravel()
    if d.size == 0:
        raise ValueError("elbow_select needs at least one eigenvalue")
    if d.size == 1:
        return 1
    x = np.arange(1, d.size + 1, dtype=float)
    dx, dy = x[-1] - x[0], d[-1] - d[0]
    dist = np.abs(dy * (x - x[0]) - dx * (d - d[0])) / np.hypot(dx, dy)
    ss_tot = np.sum((d - d.mean()) ** 2)
    if ss_tot > 0:
        slope, intercept = np.polyfit(x, d, 1)
        rel_resid = np.sqrt(np.sum((d - slope * x - intercept) ** 2) / ss_tot)
    else:
        rel_resid = 0.0
    if dist.max() < 1e-9 * abs(d[0]) or rel_resid < LINEARITY_TOL:
        return cumulative_variance_select(d)
    return int(np.argmax(dist) + 1)


@dataclass(eq=False)
class MultivariateModel:
    """Multivariate eigenstructure assembled from univariate fits.

    ``eigenvalues``/``eigenvectors`` hold the full decomposition of ``Z``;
    the first ``M`` define the retained components.
    """

    univariate: list
    Z: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    M: int
    weights: np.ndarray
    variables: List[str]
    subject_ids: List[str]
    scores: Optional[np.ndarray] = None
    univariate_scores: Optional[list] = None

    @property
    def n_variables(self) -> int:
        return len(self.univariate)

    @property
    def block_sizes(self) -> List[int]:
        return [u.n_components for u in self.univariate]

    def blocks(self):
        edges = np.concatenate([[0], np.cumsum(self.block_sizes)])
        return [slice(edges[k], edges[k + 1]) for k in range(self.n_variables)]

    @property
    def mv_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[: self.M]

    @property
    def mv_eigenvectors(self) -> np.ndarray:
        return self.eigenvectors[:, : self.M]

    def explained_variance_ratio(self) -> np.ndarray:
        total = self.eigenvalues.sum()
        return self.mv_eigenvalues / total if total > 0 else np.zeros(self.M)


def combine(univariate, scores: Sequence[ScoreMatrix], weights=None, n_components="elbow",
            variables=None) -> MultivariateModel:
    """Build the multivariate model from fitted univariate models and their scores.

    Parameters
    ----------
    n_components : 'elbow', 'variance' or int
        Truncation rule for the number of multivariate components.
    """
    if len(univariate) != len(scores):
        raise ValueError("need one score matrix per univariate model")
    for u, sm in zip(univariate, scores):
        if sm.n_components != u.n_components:
            raise ValueError("score matrix width does not match its model's rank")
    ids = _aligned(scores)
    w = _check_weights(weights, len(scores))
    Z = build_Z(scores, w)
    vals, vecs = eigen_Z(Z)
    if n_components == "elbow":
        M = elbow_select(vals)
    elif n_components == "variance":
        M = cumulative_variance_select(vals)
    else:
        M = int(n_components)
        if not 1 <= M <= vals.size:
            raise ValueError(f"n_components must be in 1..{vals.size}")
    if variables is None:
        variables = [sm.variable or f"X{k + 1}" for k, sm in enumerate(scores)]
    model = MultivariateModel(list(univariate), Z, vals, vecs, M, w, list(variables), ids,
                              univariate_scores=list(scores))
    model.scores = mv_scores(model, scores)
    return model


def mv_eigenfunctions(model: MultivariateModel, t) -> List[np.ndarray]:
    """Blocks ``psi^{(k)}(t_k)`` of the retained eigenfunctions, one ``(len(t_k), M)`` array per variable.

    ``t`` is a sequence with one array of points per variable.
    """
    if len(t) != model.n_variables:
        raise ValueError("need one array of evaluation points per variable")
    C = model.mv_eigenvectors
    out = []
    for k, (u, blk) in enumerate(zip(model.univariate, model.blocks())):
        phi = u.eigenfunctions(np.atleast_1d(t[k]))
        out.append(phi @ C[blk] / np.sqrt(model.weights[k]))
    return out


def mv_scores(model: MultivariateModel, scores: Sequence[ScoreMatrix]) -> np.ndarray:
    """``rho_il = sum_k sqrt(w_k) [c_l]^{(k)}' xi_i^{(k)}`` for the retained components."""
    _aligned(scores)
    if len(scores) != model.n_variables:
        raise ValueError("need one score matrix per variable")
    return stack_scores(scores, model.weights) @ model.mv_eigenvectors


def reconstruct_covariance(model: MultivariateModel, k: int, k2: int, s, t) -> np.ndarray:
    """``C_{k k2}(s, t) = sum_l eta_l psi_l^{(k)}(s) psi_l^{(k2)}(t)`` (0-based variable indices)."""
    psi_k = model.univariate[k].eigenfunctions(np.atleast_1d(s)) @ model.mv_eigenvectors[model.blocks()[k]]
    psi_k2 = model.univariate[k2].eigenfunctions(np.atleast_1d(t)) @ model.mv_eigenvectors[model.blocks()[k2]]
    scale = 1.0 / np.sqrt(model.weights[k] * model.weights[k2])
    return scale * (psi_k * model.mv_eigenvalues) @ psi_k2.T


def assembled_covariance(model: MultivariateModel, t) -> np.ndarray:
    """Full block matrix ``[C_{k k2}(t_k, t_k2)]`` on per-variable point sets."""
    psi = np.vstack(mv_eigenfunctions(model, t))
    return (psi * model.mv_eigenvalues) @ psi.T


def reconstruct_curves(model: MultivariateModel, t, scores=None, centered: bool = False) -> List[np.ndarray]:
    """Truncated expansion ``mu^{(k)}(t) + sum_l rho_il psi_l^{(k)}(t)`` per variable.

    Returns one ``(n, len(t_k))`` array per variable. ``scores`` defaults to
    the model's own multivariate scores.
    """
    rho = model.scores if scores is None else np.atleast_2d(np.asarray(scores, dtype=float))
    psi = mv_eigenfunctions(model, t)
    out = []
    for k, u in enumerate(model.univariate):
        curves = rho @ psi[k].T
        if not centered and u.mean is not None:
            curves = curves + u.mean(np.atleast_1d(t[k]))[None, :]
        out.append(curves)
    return out
