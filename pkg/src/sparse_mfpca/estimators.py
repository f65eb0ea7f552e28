"""Scikit-learn style estimators for univariate and multivariate sparse FPCA."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .data import SparseDataset, check_sparse_sample
from .grid_basis import DEFAULT_GRID_SIZE, build_grid, eval_basis
from .mean_smooth import MeanModel, fit_mean
from .mfpca import (
    assembled_covariance,
    combine,
    mv_eigenfunctions,
    mv_scores,
    reconstruct_covariance,
    reconstruct_curves,
)
from .scoring import conditional_scores
from .ufpca import DEFAULT_N_BASIS, DEFAULT_N_COMPONENTS, select_model


class _FunctionMean:
    """Adapter so a plain callable can stand in for a fitted mean."""

    def __init__(self, func: Callable):
        self.func = func

    def __call__(self, t):
        return np.asarray(self.func(np.asarray(t, dtype=float)), dtype=float)


def _resolve_mean(mean, t, y, basis_kind, n_basis, grid):
    if mean == "estimate":
        U = max(np.atleast_1d(n_basis))
        return fit_mean(t, y, eval_basis(basis_kind, int(U), grid.domain, grid))
    if mean == "zero":
        return MeanModel.zero(eval_basis(basis_kind, int(min(np.atleast_1d(n_basis))), grid.domain, grid))
    if callable(mean):
        return mean if isinstance(mean, MeanModel) else _FunctionMean(mean)
    raise ValueError(f"mean must be 'estimate', 'zero' or a callable, got {mean!r}")


class UnivariateFPCA(TransformerMixin, BaseEstimator):
    """Sparse functional PCA of one variable by maximum likelihood.

    Parameters
    ----------
    basis : {'bspline', 'fourier'}, default='bspline'
        Family used to expand the eigenfunctions (cubic B-splines with equally
        spaced knots, or sines and cosines).
    n_basis : int or sequence of int, default=5..10
        Candidate basis sizes; the AIC picks one.
    n_components : int or sequence of int, default=(2, 3, 4)
        Candidate ranks; the AIC picks one.
    n_grid : int, default=101
        Quadrature grid size.
    domain : (float, float), optional
        Defaults to the range of observed times.
    mean : 'estimate', 'zero' or callable, default='estimate'
        How the mean function is obtained.
    random_state : int, default=0
        Seeds fallback starting values and restarts.
    gtol, ftol, max_iter
        Optimizer tolerances.

    Attributes
    ----------
    model_ : UnivariateModel
    mean_ : callable
    eigenvalues_ : ndarray of shape (M,)
    eigenfunctions_ : OrthonormalSet
        Callable on arbitrary times in the domain.
    noise_variance_ : float
    n_components_, n_basis_ : int
    aic_ : float
    scores_ : ndarray of shape (n_subjects, M)
        Conditional-expectation scores of the training subjects.

    Examples
    --------
    >>> X = [(t_i, y_i) for t_i, y_i in zip(times, values)]   # doctest: +SKIP
    >>> fpca = UnivariateFPCA(n_basis=8, n_components=2).fit(X)  # doctest: +SKIP
    >>> fpca.transform(X).shape  # doctest: +SKIP
    (n_subjects, 2)
    """

    def __init__(self, basis="bspline", n_basis=DEFAULT_N_BASIS, n_components=DEFAULT_N_COMPONENTS,
                 n_grid=DEFAULT_GRID_SIZE, domain=None, mean="estimate", random_state=0,
                 gtol=1e-6, ftol=1e-10, max_iter=500):
        self.basis = basis
        self.n_basis = n_basis
        self.n_components = n_components
        self.n_grid = n_grid
        self.domain = domain
        self.mean = mean
        self.random_state = random_state
        self.gtol = gtol
        self.ftol = ftol
        self.max_iter = max_iter

    def _centered(self, times, values):
        return [(t, y - self.mean_(t) if t.size else y) for t, y in zip(times, values)]

    def fit(self, X, y=None):
        """Fit on a sequence of per-subject ``(t, y)`` pairs."""
        times, values = check_sparse_sample(X, self.domain)
        domain = self.domain
        if domain is None:
            allt = np.concatenate(times)
            domain = (float(allt.min()), float(allt.max()))
        grid = build_grid(domain, self.n_grid)
        self.mean_ = _resolve_mean(self.mean, np.concatenate(times), np.concatenate(values),
                                   self.basis, self.n_basis, grid)
        Xc = self._centered(times, values)
        self.model_ = select_model(
            Xc, n_basis=self.n_basis, n_components=self.n_components, grid=grid, kind=self.basis,
            seed=self.random_state, mean=self.mean_,
            gtol=self.gtol, ftol=self.ftol, maxiter=self.max_iter,
        )
        self.domain_ = domain
        self.eigenvalues_ = self.model_.eigenvalues
        self.eigenfunctions_ = self.model_.eigenfunctions
        self.noise_variance_ = self.model_.noise_variance
        self.n_components_ = self.model_.n_components
        self.n_basis_ = self.model_.n_basis
        self.aic_ = self.model_.aic
        self.scores_ = conditional_scores(self.model_, Xc).values
        return self

    def transform(self, X):
        """Conditional-expectation scores, shape ``(n_subjects, n_components_)``."""
        check_is_fitted(self, "model_")
        times, values = check_sparse_sample(X, self.domain_)
        return conditional_scores(self.model_, self._centered(times, values)).values

    def inverse_transform(self, scores, t=None):
        """Curves ``mu(t) + scores @ phi(t)'`` on ``t`` (default: the quadrature grid)."""
        check_is_fitted(self, "model_")
        t = self.model_.grid.points if t is None else np.atleast_1d(np.asarray(t, dtype=float))
        scores = np.atleast_2d(np.asarray(scores, dtype=float))
        return self.mean_(t)[None, :] + scores @ self.eigenfunctions_(t).T

    def covariance(self, s, t=None):
        check_is_fitted(self, "model_")
        return self.model_.covariance(s, t)


class MultivariateFPCA(TransformerMixin, BaseEstimator):
    """Multivariate sparse functional PCA from per-variable likelihood fits.

    Each variable is fitted with :class:`UnivariateFPCA` settings; the
    univariate scores are combined through the eigendecomposition of their
    joint covariance.

    Parameters
    ----------
    basis, n_basis, n_components_univariate, n_grid, mean, random_state, gtol, ftol, max_iter
        Passed to every univariate fit (``n_components_univariate`` is the
        candidate rank set per variable).
    n_components : 'elbow', 'variance' or int, default='elbow'
        Number of multivariate components to keep.
    weights : sequence of float, optional
        Positive per-variable weights of the inner product.

    Attributes
    ----------
    model_ : MultivariateModel
    univariate_ : list of UnivariateModel
    eigenvalues_ : ndarray of shape (M,)
    n_components_ : int
    scores_ : ndarray of shape (n_subjects, M)
    """

    def __init__(self, basis="bspline", n_basis=DEFAULT_N_BASIS,
                 n_components_univariate=DEFAULT_N_COMPONENTS, n_components="elbow",
                 n_grid=DEFAULT_GRID_SIZE, mean="estimate", weights=None, random_state=0,
                 gtol=1e-6, ftol=1e-10, max_iter=500):
        self.basis = basis
        self.n_basis = n_basis
        self.n_components_univariate = n_components_univariate
        self.n_components = n_components
        self.n_grid = n_grid
        self.mean = mean
        self.weights = weights
        self.random_state = random_state
        self.gtol = gtol
        self.ftol = ftol
        self.max_iter = max_iter

    def _univariate(self, k, domain, mean):
        return UnivariateFPCA(
            basis=self.basis, n_basis=self.n_basis, n_components=self.n_components_univariate,
            n_grid=self.n_grid, domain=domain, mean=mean, random_state=self.random_state,
            gtol=self.gtol, ftol=self.ftol, max_iter=self.max_iter,
        )

    def _means(self, p):
        if isinstance(self.mean, (list, tuple)):
            if len(self.mean) != p:
                raise ValueError("need one mean per variable")
            return list(self.mean)
        return [self.mean] * p

    def fit(self, X: SparseDataset, y=None):
        if not isinstance(X, SparseDataset):
            raise TypeError("MultivariateFPCA.fit expects a SparseDataset")
        means = self._means(X.n_variables)
        self.univariate_estimators_ = []
        score_mats = []
        for k in range(X.n_variables):
            est = self._univariate(k, X.domains[k], means[k]).fit(X.sample(k))
            self.univariate_estimators_.append(est)
            sm = conditional_scores(est.model_, est._centered(X.times[k], X.values[k]),
                                    X.subject_ids, X.variables[k])
            est.model_.scores = sm
            score_mats.append(sm)
        self.univariate_ = [est.model_ for est in self.univariate_estimators_]
        self.model_ = combine(self.univariate_, score_mats, weights=self.weights,
                              n_components=self.n_components, variables=X.variables)
        self.variables_ = list(X.variables)
        self.domains_ = list(X.domains)
        self.eigenvalues_ = self.model_.mv_eigenvalues
        self.n_components_ = self.model_.M
        self.scores_ = self.model_.scores
        return self

    def univariate_scores(self, X: SparseDataset):
        check_is_fitted(self, "model_")
        out = []
        for k, est in enumerate(self.univariate_estimators_):
            xc = est._centered(X.times[k], X.values[k])
            out.append(conditional_scores(est.model_, xc, X.subject_ids, X.variables[k]))
        return out

    def transform(self, X: SparseDataset):
        """Multivariate scores of new subjects, shape ``(n_subjects, n_components_)``."""
        return mv_scores(self.model_, self.univariate_scores(X))

    def eigenfunctions(self, t: Sequence):
        """Per-variable blocks of the retained multivariate eigenfunctions."""
        check_is_fitted(self, "model_")
        return mv_eigenfunctions(self.model_, t)

    def covariance(self, k, k2, s, t):
        check_is_fitted(self, "model_")
        return reconstruct_covariance(self.model_, k, k2, s, t)

    def assembled_covariance(self, t: Sequence):
        check_is_fitted(self, "model_")
        return assembled_covariance(self.model_, t)

    def inverse_transform(self, scores, t: Sequence, centered=False):
        """Per-variable curves from multivariate scores."""
        check_is_fitted(self, "model_")
        return reconstruct_curves(self.model_, t, scores=scores, centered=centered)
