"""Accuracy metrics comparing estimated and true functional quantities on a grid."""

import numpy as np

METRIC_GRID_SIZE = 100


def metric_grid(domain=(0.0, 1.0), size: int = METRIC_GRID_SIZE) -> np.ndarray:
    """Equally spaced evaluation points (endpoints included)."""
    return np.linspace(domain[0], domain[1], size)


def rmse_cov(estimate, truth) -> float:
    """Root mean squared difference over all entries of two assembled covariance matrices."""
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape or estimate.ndim != 2 or estimate.shape[0] != estimate.shape[1]:
        raise ValueError("covariance matrices must be square and of equal shape")
    return float(np.sqrt(np.mean((estimate - truth) ** 2)))


def rmse_eigenfunction(estimate, truth) -> float:
    """Sign-invariant RMSE: the smaller of RMSE(est - true) and RMSE(est + true)."""
    estimate = np.asarray(estimate, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if estimate.shape != truth.shape:
        raise ValueError("eigenfunctions must be evaluated on the same grid")
    minus = np.sqrt(np.mean((estimate - truth) ** 2))
    plus = np.sqrt(np.mean((estimate + truth) ** 2))
    return float(min(minus, plus))


def rse_eigenvalue(estimate: float, truth: float) -> float:
    """Relative squared error ``(est - true)**2 / true**2``."""
    if truth == 0:
        raise ValueError("relative error is undefined for a zero true eigenvalue")
    return float((estimate - truth) ** 2 / truth**2)


def rmse_reconstruction(fitted, truth) -> float:
    """RMSE over subjects and grid points of centered curves, shape ``(n, |G|)``."""
    fitted = np.asarray(fitted, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if fitted.shape != truth.shape:
        raise ValueError("fitted and true curves must have the same shape")
    return float(np.sqrt(np.mean((fitted - truth) ** 2)))
