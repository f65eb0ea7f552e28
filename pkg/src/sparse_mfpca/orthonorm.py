"""Weighted modified Gram-Schmidt and continuous eigenfunction representation."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from .exceptions import RankDeficiencyError
from .grid_basis import BasisSystem, QuadratureGrid

PIVOT_TOL = 1e-10
SIGN_TOL = 1e-8


def mgs_qr(raw, weights, tol: float = PIVOT_TOL):
    """Modified Gram-Schmidt under ``<f, g>_w = sum_j w_j f_j g_j``.

    Returns ``(Q, R)`` with ``raw = Q @ R``, ``Q.T @ diag(w) @ Q = I`` and
    ``R`` upper triangular with positive diagonal. No sign canonicalization.
    """
    V = np.array(raw, dtype=float, copy=True)
    if V.ndim == 1:
        V = V[:, None]
    w = np.asarray(weights, dtype=float)
    H, M = V.shape
    R = np.zeros((M, M))
    for q in range(M):
        for v in range(q):
            R[v, q] = np.dot(w * V[:, v], V[:, q])
            V[:, q] -= R[v, q] * V[:, v]
        norm = np.sqrt(np.dot(w * V[:, q], V[:, q]))
        if not norm > tol:
            raise RankDeficiencyError(q, norm)
        R[q, q] = norm
        V[:, q] /= norm
    return V, R


def mgs_qr_backward(Q, R, Q_bar, weights) -> np.ndarray:
    """Pull back a gradient w.r.t. ``Q`` of :func:`mgs_qr` to the raw columns.

    Uses the thin-QR adjoint with the weighted inner product:
    ``raw_bar = (Q_bar + W Q copyltu(-Q_bar' Q)) R^{-T}``.
    """
    Mmat = -Q_bar.T @ Q
    sym = np.tril(Mmat) + np.tril(Mmat, -1).T
    rhs = Q_bar + (weights[:, None] * Q) @ sym
    # X R' = rhs  <=>  R X' = rhs'
    return solve_triangular(R, rhs.T, lower=False).T


def canonical_signs(values, tol: float = SIGN_TOL) -> np.ndarray:
    """Sign (+1/-1) per column making the first entry above ``tol`` in magnitude positive."""
    values = np.atleast_2d(np.asarray(values, dtype=float).T).T
    signs = np.ones(values.shape[1])
    for q in range(values.shape[1]):
        idx = np.flatnonzero(np.abs(values[:, q]) > tol)
        if idx.size and values[idx[0], q] < 0:
            signs[q] = -1.0
    return signs


@dataclass(frozen=True, eq=False)
class OrthonormalSet:
    """Orthonormal functions stored by their values on a quadrature grid.

    ``coeffs_orthobasis`` is filled by :func:`continuous_representation`; once
    present the set can be evaluated anywhere in the domain.
    """

    values: np.ndarray
    grid: QuadratureGrid
    coeffs_orthobasis: Optional[np.ndarray] = None
    basis: Optional[BasisSystem] = None

    @property
    def n_functions(self) -> int:
        return self.values.shape[1]

    def gram(self) -> np.ndarray:
        return self.grid.inner(self.values, self.values)

    def basis_coefficients(self) -> np.ndarray:
        """Coefficients ``A`` such that ``phi(t) = B(t) @ A`` in the raw basis."""
        if self.coeffs_orthobasis is None:
            raise ValueError("continuous representation not computed; call continuous_representation")
        return self.basis.grid_gram_inv_sqrt @ self.coeffs_orthobasis

    def __call__(self, t) -> np.ndarray:
        """Evaluate all functions at ``t``; returns shape ``(len(t), M)``."""
        return self.basis.evaluate(t) @ self.basis_coefficients()

    def subset(self, columns) -> "OrthonormalSet":
        columns = np.asarray(columns)
        coeffs = None if self.coeffs_orthobasis is None else self.coeffs_orthobasis[:, columns]
        return replace(self, values=self.values[:, columns], coeffs_orthobasis=coeffs)

    def scaled(self, signs) -> "OrthonormalSet":
        signs = np.asarray(signs, dtype=float)
        coeffs = None if self.coeffs_orthobasis is None else self.coeffs_orthobasis * signs
        return replace(self, values=self.values * signs, coeffs_orthobasis=coeffs)


def weighted_mgs(raw, grid: QuadratureGrid, tol: float = PIVOT_TOL) -> OrthonormalSet:
    """Orthonormalize grid-valued columns by weighted modified Gram-Schmidt.

    Parameters
    ----------
    raw : ndarray of shape (H, M)
        Candidate functions evaluated on ``grid``.
    grid : QuadratureGrid

    Returns
    -------
    OrthonormalSet
        Columns span the same space as ``raw``; each column's first entry
        exceeding 1e-8 in magnitude is positive.

    Raises
    ------
    RankDeficiencyError
        If a column's residual weighted norm falls to ``tol`` or below.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim == 1:
        raw = raw[:, None]
    if raw.shape[0] != grid.size:
        raise ValueError(f"raw has {raw.shape[0]} rows but the grid has {grid.size} points")
    Q, _ = mgs_qr(raw, grid.weights, tol)
    return OrthonormalSet(Q * canonical_signs(Q), grid)


def continuous_representation(oset: OrthonormalSet, basis: BasisSystem) -> OrthonormalSet:
    """Attach coefficients in the orthonormalized basis so the set can be evaluated anywhere.

    The orthonormal basis is ``G^{-1/2} B(t)``, with ``G`` the Gram matrix of
    the basis under the grid inner product, and the coefficients are
    ``G^{-1/2} B' W Phi``. Functions lying in the span of the basis are
    therefore reproduced exactly at the grid points.
    """
    if basis.grid is not oset.grid and not (
        basis.grid.size == oset.grid.size and np.array_equal(basis.grid.points, oset.grid.points)
    ):
        raise ValueError("orthonormal set and basis are defined on different grids")
    Bt = basis.eval_matrix @ basis.grid_gram_inv_sqrt
    coeffs = Bt.T @ (basis.grid.weights[:, None] * oset.values)
    return replace(oset, coeffs_orthobasis=coeffs, basis=basis)


def projection_matrix(basis: BasisSystem) -> np.ndarray:
    """``U x H`` matrix mapping grid values to raw-basis coefficients, ``G^{-1} B' W``."""
    S = basis.grid_gram_inv_sqrt
    return S @ S @ (basis.eval_matrix * basis.grid.weights[:, None]).T
