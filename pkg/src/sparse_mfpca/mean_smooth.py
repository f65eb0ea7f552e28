"""Penalized-spline estimation of mean functions and data centering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SparseDataset
from .exceptions import InsufficientDataError, MissingModelError
from .grid_basis import BasisSystem

SMOOTHING_LADDER = np.logspace(-8, 2, 25)


@dataclass(frozen=True, eq=False)
class MeanModel:
    """Mean function ``mu(t) = B(t) @ coeffs``."""

    basis: BasisSystem
    coeffs: np.ndarray
    smoothing: float

    def __call__(self, t) -> np.ndarray:
        return self.basis.evaluate(t) @ self.coeffs

    @classmethod
    def zero(cls, basis: BasisSystem) -> "MeanModel":
        return cls(basis, np.zeros(basis.count), 0.0)


def roughness_penalty(basis: BasisSystem) -> np.ndarray:
    """Penalty matrix whose null space contains the constants.

    Second differences of the coefficients for B-splines; squared second
    derivative (diagonal in frequency) for the Fourier system.
    """
    U = basis.count
    if basis.kind == "bspline":
        if U < 3:
            return np.zeros((U, U))
        D = np.diff(np.eye(U), n=2, axis=0)
        return D.T @ D
    L = basis.domain[1] - basis.domain[0]
    freq = np.array([(u + 1) // 2 for u in range(U)], dtype=float)
    return np.diag((2 * np.pi * freq / L) ** 4)


def fit_mean(t, y, basis: BasisSystem, ladder=SMOOTHING_LADDER) -> MeanModel:
    """Fit a penalized least-squares spline to pooled ``(t, y)`` pairs.

    The smoothing parameter is chosen by generalized cross-validation over
    ``ladder``. The criterion minimized for a given ``lam`` is
    ``mean((y - B c)**2) + lam * c' P c``.

    Raises
    ------
    InsufficientDataError
        If there are fewer distinct times than basis functions.
    """
    t = np.asarray(t, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if t.shape != y.shape:
        raise ValueError("t and y must have the same length")
    if np.unique(t).size < basis.count:
        raise InsufficientDataError(
            f"mean fit needs at least {basis.count} distinct time points, got {np.unique(t).size}"
        )
    N = t.size
    B = basis.evaluate(t)
    BtB = B.T @ B / N
    Bty = B.T @ y / N
    P = roughness_penalty(basis)
    best = None
    for lam in ladder:
        A = BtB + lam * P
        try:
            c = np.linalg.solve(A, Bty)
            trace = np.trace(np.linalg.solve(A, BtB))
        except np.linalg.LinAlgError:
            continue
        if N - trace <= 0:
            continue
        rss = np.sum((y - B @ c) ** 2)
        gcv = N * rss / (N - trace) ** 2
        if best is None or gcv < best[0] - 1e-15 * abs(best[0]):
            best = (gcv, lam, c)
    if best is None:
        raise InsufficientDataError("no smoothing parameter gave a well-posed fit")
    return MeanModel(basis, best[2], float(best[1]))


def center(dataset: SparseDataset, means) -> SparseDataset:
    """Subtract each variable's mean function from its observations.

    ``means`` maps variable name (or index) to :class:`MeanModel`, or is a
    list ordered like ``dataset.variables``.
    """
    out = dataset
    for k, name in enumerate(dataset.variables):
        if isinstance(means, dict):
            model = means.get(name, means.get(k))
        else:
            model = means[k] if k < len(means) else None
        if model is None:
            raise MissingModelError(f"no mean model for variable {name!r}")
        resid = [y - model(t) if t.size else y.copy() for t, y in zip(dataset.times[k], dataset.values[k])]
        out = out.with_values(k, resid)
    return out
