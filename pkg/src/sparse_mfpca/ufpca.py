"""Univariate sparse FPCA by maximum likelihood over Gram-Schmidt-orthonormalized splines.

The observation covariance of subject ``i`` is ``C_i = Phi_i diag(lam) Phi_i' + s2 I``
where ``Phi_i`` holds the eigenfunctions at the subject's times. The
eigenfunctions are the weighted MGS orthonormalization of ``B @ beta`` on a
quadrature grid, carried to arbitrary times through the continuous
representation. Eigenvalues and noise variance are optimized on the log scale.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import check_sparse_sample
from .exceptions import (
    DivergedError,
    NumericalError,
    OptimizerStalledError,
    RankDeficiencyError,
    SelectionError,
)
from .grid_basis import BasisSystem, QuadratureGrid, build_grid, eval_basis
from .mean_smooth import MeanModel
from .optim import minimize_bfgs
from .orthonorm import (
    OrthonormalSet,
    canonical_signs,
    continuous_representation,
    mgs_qr,
    mgs_qr_backward,
    projection_matrix,
)

logger = logging.getLogger(__name__)

DEFAULT_N_BASIS = tuple(range(5, 11))
DEFAULT_N_COMPONENTS = (2, 3, 4)
N_RESTARTS = 3


@dataclass(frozen=True, eq=False)
class UnivariateParams:
    """Unconstrained parameters: basis coefficients, log-eigenvalues, log-noise-variance."""

    beta: np.ndarray
    eta: np.ndarray
    gamma: float

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.exp(self.eta)

    @property
    def noise_variance(self) -> float:
        return float(np.exp(self.gamma))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.beta.ravel(), self.eta, [self.gamma]])

    @classmethod
    def from_vector(cls, x, U: int, M: int) -> "UnivariateParams":
        x = np.asarray(x, dtype=float)
        return cls(x[: U * M].reshape(U, M).copy(), x[U * M: U * M + M].copy(), float(x[-1]))


@dataclass(eq=False)
class UnivariateModel:
    """A fitted univariate reduced-rank model.

    Eigenvalues are sorted in decreasing order and ``eigenfunctions`` columns
    follow that order. ``params`` are the optimizer's raw parameters (column
    order as optimized), which reproduce ``nll``.
    """

    params: UnivariateParams
    eigenfunctions: OrthonormalSet
    eigenvalues: np.ndarray
    noise_variance: float
    basis: BasisSystem
    grid: QuadratureGrid
    nll: float
    n_subjects: int
    mean: Optional[MeanModel] = None
    converged: bool = True
    n_iter: int = 0
    aic: Optional[float] = None
    candidates: list = field(default_factory=list)
    scores: Optional[object] = None

    @property
    def n_components(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def n_basis(self) -> int:
        return self.basis.count

    def covariance(self, s, t=None) -> np.ndarray:
        """Fitted covariance surface (without the noise term) on ``s x t``."""
        t = s if t is None else t
        return (self.eigenfunctions(s) * self.eigenvalues) @ self.eigenfunctions(t).T


def reduced_rank_cov(phi, eigenvalues, noise_variance) -> np.ndarray:
    """``Phi diag(lam) Phi' + s2 I`` for eigenfunction values ``phi`` (m x M)."""
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    lam = np.atleast_1d(np.asarray(eigenvalues, dtype=float))
    if np.any(lam <= 0) or not noise_variance > 0:
        raise ValueError("eigenvalues and noise variance must be positive")
    if phi.shape[1] != lam.shape[0]:
        raise ValueError("phi must have one column per eigenvalue")
    C = (phi * lam) @ phi.T
    C = (C + C.T) / 2
    C[np.diag_indices_from(C)] += noise_variance
    return C


class _PaddedSample:
    """Subjects stacked into zero-padded arrays for batched linear algebra.

    A padded slot has a zero basis row and zero residual, so its covariance
    block is ``s2 I`` and it contributes exactly ``log s2`` to the
    log-determinant, which is subtracted back out.
    """

    def __init__(self, times, values, basis: BasisSystem):
        keep = [i for i, t in enumerate(times) if t.size > 0]
        self.index = np.array(keep, dtype=int)
        self.n = len(keep)
        if self.n == 0:
            raise ValueError("no subject has observations")
        counts = np.array([times[i].size for i in keep])
        self.m_max = int(counts.max())
        U = basis.count
        self.Bobs = np.zeros((self.n, self.m_max, U))
        self.y = np.zeros((self.n, self.m_max))
        for r, i in enumerate(keep):
            m = counts[r]
            self.Bobs[r, :m] = basis.evaluate(times[i])
            self.y[r, :m] = values[i]
        self.n_pad = float(np.sum(self.m_max - counts))
        self.counts = counts


class LikelihoodObjective:
    """Average negative log-likelihood and its analytic gradient.

    Parameters
    ----------
    X : sequence of (t, y)
        Centered observations per subject.
    basis : BasisSystem
    M : int
        Number of eigenfunctions.
    """

    def __init__(self, X, basis: BasisSystem, M: int):
        times, values = check_sparse_sample(X, basis.domain)
        self.basis = basis
        self.grid = basis.grid
        self.U = basis.count
        self.M = int(M)
        self.sample = _PaddedSample(times, values, basis)
        self.P = projection_matrix(basis)
        self.B = basis.eval_matrix
        self.w = basis.grid.weights

    def eigenfunction_coeffs(self, beta):
        """Raw-basis coefficients ``A`` of the orthonormalized eigenfunctions (plus QR factors)."""
        Q, R = mgs_qr(self.B @ beta, self.w)
        return self.P @ Q, Q, R

    def _forward(self, params: UnivariateParams):
        A, Q, R = self.eigenfunction_coeffs(params.beta)
        lam = np.exp(params.eta)
        s2 = np.exp(params.gamma)
        s = self.sample
        F = s.Bobs @ A
        C = np.einsum("imq,q,ikq->imk", F, lam, F)
        C = (C + np.swapaxes(C, 1, 2)) / 2
        C[:, np.arange(s.m_max), np.arange(s.m_max)] += s2
        L = np.linalg.cholesky(C)
        logdet = 2 * np.log(np.diagonal(L, axis1=1, axis2=2)).sum(axis=1)
        Cinv = np.linalg.inv(C)
        v = np.einsum("imk,ik->im", Cinv, s.y)
        quad = np.einsum("im,im->i", s.y, v)
        value = (quad.sum() + logdet.sum() - s.n_pad * params.gamma) / s.n
        return value, (A, Q, R, F, lam, s2, Cinv, v)

    def value(self, params: UnivariateParams) -> float:
        return float(self._forward(params)[0])

    def value_and_grad(self, params: UnivariateParams):
        value, (A, Q, R, F, lam, s2, Cinv, v) = self._forward(params)
        s = self.sample
        S = (Cinv - v[:, :, None] * v[:, None, :]) / s.n
        SF = S @ F
        dlam = np.einsum("imq,imq->q", F, SF)
        dA = 2 * np.einsum("imu,imq->uq", s.Bobs, SF) * lam
        trS = np.trace(S, axis1=1, axis2=2).sum()
        dgamma = s2 * trS - s.n_pad / s.n
        dQ = self.P.T @ dA
        draw = mgs_qr_backward(Q, R, dQ, self.w)
        dbeta = self.B.T @ draw
        grad = UnivariateParams(dbeta, lam * dlam, float(dgamma))
        return float(value), grad

    def fun_grad(self, x):
        """Vector interface for the optimizer; non-finite on numerical failure."""
        params = UnivariateParams.from_vector(x, self.U, self.M)
        try:
            # trial steps may overflow exp(eta); the line search backtracks on inf
            with np.errstate(over="ignore", invalid="ignore"):
                f, g = self.value_and_grad(params)
        except (RankDeficiencyError, np.linalg.LinAlgError, FloatingPointError):
            return np.inf, np.full(x.shape, np.nan)
        if not np.isfinite(f):
            return np.inf, np.full(x.shape, np.nan)
        return f, g.to_vector()


def nll(params: UnivariateParams, X, basis: BasisSystem) -> float:
    """Average negative log-likelihood of centered sparse data ``X``."""
    return LikelihoodObjective(X, basis, params.beta.shape[1]).value(params)


def nll_gradient(params: UnivariateParams, X, basis: BasisSystem) -> UnivariateParams:
    """Gradient of :func:`nll` with respect to ``(beta, eta, gamma)``."""
    return LikelihoodObjective(X, basis, params.beta.shape[1]).value_and_grad(params)[1]


def _pooled_variance(X) -> float:
    y = np.concatenate([np.asarray(v, dtype=float) for _, v in X])
    var = float(np.var(y)) if y.size > 1 else 0.0
    return var if var > 1e-12 else 1.0


def _covariance_start(X, basis: BasisSystem, M: int) -> Optional[np.ndarray]:
    """Leading eigenfunction coefficients of a tensor-spline fit to raw cross-products.

    Off-diagonal products ``y_ij * y_ik`` (j != k) estimate the covariance
    surface free of the noise; they are regressed on ``B(t_j) (x) B(t_k)``.
    """
    U = basis.count
    rows, targets = [], []
    for t, y in X:
        t = np.asarray(t, dtype=float)
        if t.size < 2:
            continue
        b = basis.evaluate(t)
        j, k = np.nonzero(~np.eye(t.size, dtype=bool))
        rows.append(np.einsum("pu,pv->puv", b[j], b[k]).reshape(len(j), U * U))
        targets.append(np.asarray(y)[j] * np.asarray(y)[k])
    if not rows:
        return None
    D = np.vstack(rows)
    z = np.concatenate(targets)
    if D.shape[0] < U * (U + 1) // 2:
        return None
    DtD = D.T @ D
    ridge = 1e-6 * np.trace(DtD) / DtD.shape[0]
    K = np.linalg.solve(DtD + ridge * np.eye(U * U), D.T @ z).reshape(U, U)
    K = (K + K.T) / 2
    S = basis.grid_gram_inv_sqrt
    G_half = np.linalg.inv(S)
    vals, vecs = np.linalg.eigh(G_half @ K @ G_half)
    order = np.argsort(vals)[::-1][:M]
    if not np.all(vals[order] > 0):
        return None
    return S @ vecs[:, order]


def initial_params(X, basis: BasisSystem, M: int, seed=0, spectral: bool = True) -> UnivariateParams:
    """Starting values: spectral eigenfunctions (random fallback), spread eigenvalues, noise at 10%."""
    var = _pooled_variance(X)
    beta = _covariance_start(X, basis, M) if spectral else None
    if beta is None:
        rng = np.random.default_rng(seed)
        beta = 0.1 * rng.standard_normal((basis.count, M))
    eta = np.linspace(np.log(var / 2), np.log(var / 20), M)
    return UnivariateParams(np.asarray(beta, dtype=float), eta, float(np.log(0.1 * var)))


def _build_model(objective: LikelihoodObjective, params: UnivariateParams, value: float,
                 converged: bool, n_iter: int, mean=None) -> UnivariateModel:
    return model_from_params(params, objective.basis, value, objective.sample.n, mean=mean,
                             converged=converged, n_iter=n_iter)


def model_from_params(params: UnivariateParams, basis: BasisSystem, nll_value: float, n_subjects: int,
                      mean=None, converged: bool = True, n_iter: int = 0) -> UnivariateModel:
    """Assemble a model from raw parameters (eigenfunctions sorted by eigenvalue, signs canonical)."""
    Q, _ = mgs_qr(basis.eval_matrix @ params.beta, basis.grid.weights)
    lam = np.exp(params.eta)
    order = np.argsort(-lam, kind="stable")
    values = Q[:, order]
    values = values * canonical_signs(values)
    eigenfunctions = continuous_representation(OrthonormalSet(values, basis.grid), basis)
    return UnivariateModel(
        params=params,
        eigenfunctions=eigenfunctions,
        eigenvalues=lam[order],
        noise_variance=float(np.exp(params.gamma)),
        basis=basis,
        grid=basis.grid,
        nll=float(nll_value),
        n_subjects=int(n_subjects),
        mean=mean,
        converged=converged,
        n_iter=n_iter,
    )


def fit(X, basis: BasisSystem, M: int, init=None, seed: int = 0, gtol: float = 1e-6,
        ftol: float = 1e-10, maxiter: int = 500, n_restarts: int = N_RESTARTS,
        mean: Optional[MeanModel] = None) -> UnivariateModel:
    """Fit a rank-``M`` model to centered data by BFGS on the negative log-likelihood.

    Parameters
    ----------
    X : sequence of (t, y)
        Centered observations per subject.
    basis : BasisSystem
    M : int
    init : UnivariateParams, optional
        Starting point; by default a spectral start (see :func:`initial_params`).
    seed : int
        Seeds the random fallback start and the restarts.
    n_restarts : int
        Random restarts tried when the first run stalls in the line search.

    Raises
    ------
    OptimizerStalledError
        If every run stalls; ``err.best`` is the best model found.
    DivergedError
        If the objective is not finite at the start.
    """
    if M < 1 or M > basis.count:
        raise ValueError(f"rank M={M} must satisfy 1 <= M <= U={basis.count}")
    objective = LikelihoodObjective(X, basis, M)
    if init is None:
        init = initial_params(X, basis, M, seed=seed)
    U = basis.count
    starts = [init.to_vector()]
    best = None
    stalled_all = True
    attempt = 0
    while attempt < len(starts):
        x0 = starts[attempt]
        try:
            res = minimize_bfgs(objective.fun_grad, x0, gtol=gtol, ftol=ftol, maxiter=maxiter)
            stalled = False
        except OptimizerStalledError as exc:
            res = exc.best
            stalled = True
            logger.debug("fit (U=%d, M=%d) attempt %d stalled: %s", U, M, attempt, exc)
        except DivergedError:
            if attempt == 0:
                raise
            res, stalled = None, True
        if res is not None and (best is None or res.fun < best[0].fun):
            best = (res, stalled)
        stalled_all = stalled_all and stalled
        if attempt == 0 and stalled:
            rng = np.random.default_rng([seed, U, M])
            for _ in range(n_restarts):
                rs = initial_params(X, basis, M, spectral=False)
                beta = 0.1 * rng.standard_normal((U, M))
                starts.append(UnivariateParams(beta, rs.eta, rs.gamma).to_vector())
        attempt += 1
    res, stalled = best
    params = UnivariateParams.from_vector(res.x, U, M)
    model = _build_model(objective, params, res.fun, converged=not stalled, n_iter=int(res.nit), mean=mean)
    if stalled_all:
        raise OptimizerStalledError(f"every optimization run stalled (U={U}, M={M})", best=model)
    return model


def aic(model_or_nll, n: int, U: int, M: int) -> float:
    """``n * nll + U * M**2 + M + 1``."""
    if M < 1:
        raise ValueError("AIC is defined for M >= 1")
    value = model_or_nll.nll if isinstance(model_or_nll, UnivariateModel) else float(model_or_nll)
    return n * value + U * M * M + M + 1


def select_model(X, n_basis=DEFAULT_N_BASIS, n_components=DEFAULT_N_COMPONENTS, grid: QuadratureGrid = None,
                 kind: str = "bspline", domain=None, seed: int = 0, accept_stalled: bool = True,
                 mean: Optional[MeanModel] = None, **fit_options) -> UnivariateModel:
    """Fit every ``(U, M)`` pair and return the AIC-minimizing model.

    Ties are broken by smaller ``M``, then smaller ``U``. Each candidate's
    outcome is recorded in ``model.candidates`` as dicts with keys
    ``U, M, nll, aic, converged, error``.

    Raises
    ------
    SelectionError
        If every candidate fails.
    """
    n_basis = sorted(int(u) for u in np.atleast_1d(n_basis))
    n_components = sorted(int(m) for m in np.atleast_1d(n_components))
    if not n_basis or not n_components:
        raise ValueError("candidate ranges must be nonempty")
    if max(n_components) > min(n_basis):
        raise ValueError("max(n_components) must not exceed min(n_basis)")
    if grid is None:
        grid = build_grid(domain if domain is not None else (0.0, 1.0))
    domain = grid.domain
    candidates, failures = [], {}
    best = None
    for U in n_basis:
        basis = eval_basis(kind, U, domain, grid)
        for M in n_components:
            record = {"U": U, "M": M, "nll": None, "aic": None, "converged": False, "error": None}
            try:
                model = fit(X, basis, M, seed=seed, mean=mean, **fit_options)
            except OptimizerStalledError as exc:
                if not accept_stalled or exc.best is None:
                    failures[(U, M)] = str(exc)
                    record["error"] = str(exc)
                    candidates.append(record)
                    continue
                warnings.warn(f"(U={U}, M={M}) optimizer stalled; using best iterate", RuntimeWarning)
                model = exc.best
            except (NumericalError, np.linalg.LinAlgError, ValueError) as exc:
                failures[(U, M)] = str(exc)
                record["error"] = str(exc)
                candidates.append(record)
                continue
            model.aic = aic(model, model.n_subjects, U, M)
            record.update(nll=model.nll, aic=model.aic, converged=model.converged)
            candidates.append(record)
            key = (model.aic, M, U)
            if best is None or key < best[0]:
                best = (key, model)
    if best is None:
        raise SelectionError(failures)
    model = best[1]
    model.candidates = candidates
    return model
