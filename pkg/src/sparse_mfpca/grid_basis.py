"""Quadrature grids and basis systems (B-spline and Fourier)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.interpolate import BSpline

from .exceptions import DomainError, IllConditionedBasisError

DEFAULT_GRID_SIZE = 101
BSPLINE_ORDER = 4

_DOMAIN_TOL = 1e-12


def _check_domain(domain) -> Tuple[float, float]:
    a, b = (float(v) for v in domain)
    if not (np.isfinite(a) and np.isfinite(b)) or a >= b:
        raise ValueError(f"domain must be a nondegenerate interval, got {domain!r}")
    return a, b


def trapezoid_weights(points) -> np.ndarray:
    """Trapezoid-rule weights for (possibly non-uniform) abscissae."""
    points = np.asarray(points, dtype=float)
    d = np.diff(points)
    w = np.empty_like(points)
    w[0] = d[0] / 2
    w[-1] = d[-1] / 2
    w[1:-1] = (d[:-1] + d[1:]) / 2
    return w


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Dense grid of quadrature points with trapezoid weights.

    Attributes
    ----------
    points : ndarray of shape (H,)
        Strictly increasing abscissae, first and last equal to the domain ends.
    weights : ndarray of shape (H,)
        Trapezoid weights; they sum to the domain length.
    domain : tuple of float
        The closed interval ``(a, b)``.
    """

    points: np.ndarray
    weights: np.ndarray
    domain: Tuple[float, float]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def inner(self, f, g) -> np.ndarray:
        """Discrete weighted inner product ``sum_j w_j f_j g_j`` (column-wise for matrices)."""
        f = np.asarray(f, dtype=float)
        g = np.asarray(g, dtype=float)
        return (f * self.weights.reshape((-1,) + (1,) * (f.ndim - 1))).T @ g

    def integrate(self, values) -> np.ndarray:
        return self.weights @ np.asarray(values, dtype=float)


def build_grid(domain=(0.0, 1.0), H: int = DEFAULT_GRID_SIZE) -> QuadratureGrid:
    """Equally spaced grid on ``domain`` with ``H`` points and trapezoid weights."""
    a, b = _check_domain(domain)
    if int(H) != H or H < 3:
        raise ValueError(f"grid size H must be an integer >= 3, got {H!r}")
    points = np.linspace(a, b, int(H))
    return QuadratureGrid(points, trapezoid_weights(points), (a, b))


def grid_from_points(points) -> QuadratureGrid:
    """Wrap user-supplied (non-uniform) abscissae as a quadrature grid."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 1 or points.size < 3:
        raise ValueError("a quadrature grid needs at least 3 points")
    if np.any(np.diff(points) <= 0):
        raise ValueError("grid points must be strictly increasing")
    return QuadratureGrid(points, trapezoid_weights(points), (points[0], points[-1]))


def gram_inv_sqrt(gram) -> np.ndarray:
    """Symmetric inverse square root of an SPD matrix.

    Raises
    ------
    IllConditionedBasisError
        If the smallest eigenvalue is not above ``1e-12`` times the largest.
    """
    gram = np.asarray(gram, dtype=float)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise ValueError("gram must be a square matrix")
    sym = (gram + gram.T) / 2
    if not np.allclose(sym, gram, rtol=1e-10, atol=1e-14 * max(1.0, np.abs(gram).max())):
        raise ValueError("gram must be symmetric")
    vals, vecs = np.linalg.eigh(sym)
    if vals[-1] <= 0 or vals[0] <= 1e-12 * vals[-1]:
        raise IllConditionedBasisError(
            f"Gram matrix is near-singular: smallest eigenvalue {vals[0]:.3e}, "
            f"largest {vals[-1]:.3e}"
        )
    root = (vecs / np.sqrt(vals)) @ vecs.T
    return (root + root.T) / 2


def _bspline_knots(U: int, order: int, domain) -> np.ndarray:
    a, b = domain
    interior = np.linspace(a, b, U - order + 2)[1:-1]
    return np.concatenate([np.full(order, a), interior, np.full(order, b)])


def _bspline_eval(knots, order, U, t) -> np.ndarray:
    spl = BSpline(knots, np.eye(U), order - 1, extrapolate=False)
    out = spl(t)
    # right endpoint belongs to the last span
    return np.nan_to_num(out, nan=0.0)


def _bspline_gram(knots, order, U) -> np.ndarray:
    # Gauss-Legendre per knot span, exact for the degree 2*(order-1) products
    nodes, wts = np.polynomial.legendre.leggauss(order)
    spans = np.unique(knots)
    lo, hi = spans[:-1], spans[1:]
    half = (hi - lo)[:, None] / 2
    x = (lo[:, None] + half * (nodes[None, :] + 1)).ravel()
    w = (half * wts[None, :]).ravel()
    vals = _bspline_eval(knots, order, U, x)
    return (vals * w[:, None]).T @ vals


def _fourier_eval(U, domain, t) -> np.ndarray:
    a, b = domain
    L = b - a
    s = (np.asarray(t, dtype=float) - a) / L
    out = np.empty((s.shape[0], U))
    out[:, 0] = 1.0 / np.sqrt(L)
    for u in range(1, U):
        freq = (u + 1) // 2
        trig = np.sin if u % 2 == 1 else np.cos
        out[:, u] = np.sqrt(2.0 / L) * trig(2 * np.pi * freq * s)
    return out


@dataclass(frozen=True, eq=False)
class BasisSystem:
    """A finite basis evaluated on a quadrature grid.

    Attributes
    ----------
    kind : {'bspline', 'fourier'}
    count : int
        Number of basis functions ``U``.
    domain : tuple of float
    grid : QuadratureGrid
    eval_matrix : ndarray of shape (H, U)
        Basis values on the grid.
    gram : ndarray of shape (U, U)
        Exact L2 Gram matrix of the basis on the domain.
    gram_inv_sqrt : ndarray of shape (U, U)
    order : int or None
        B-spline order (4 = cubic); None for Fourier.
    knots : ndarray or None
    """

    kind: str
    count: int
    domain: Tuple[float, float]
    grid: QuadratureGrid
    eval_matrix: np.ndarray
    gram: np.ndarray
    gram_inv_sqrt: np.ndarray
    order: Optional[int] = None
    knots: Optional[np.ndarray] = None
    _grid_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def evaluate(self, t) -> np.ndarray:
        """Basis values at arbitrary points inside the domain, shape ``(len(t), U)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        a, b = self.domain
        tol = _DOMAIN_TOL * (b - a)
        if t.size and (t.min() < a - tol or t.max() > b + tol):
            bad = t[(t < a - tol) | (t > b + tol)][0]
            raise DomainError(f"point {bad!r} lies outside the domain [{a}, {b}]")
        t = np.clip(t, a, b)
        if self.kind == "bspline":
            return _bspline_eval(self.knots, self.order, self.count, t)
        return _fourier_eval(self.count, self.domain, t)

    @property
    def grid_gram(self) -> np.ndarray:
        """Gram matrix under the grid's discrete inner product, ``B' W B``."""
        if "gram" not in self._grid_cache:
            B = self.eval_matrix
            g = (B * self.grid.weights[:, None]).T @ B
            self._grid_cache["gram"] = (g + g.T) / 2
        return self._grid_cache["gram"]

    @property
    def grid_gram_inv_sqrt(self) -> np.ndarray:
        if "inv_sqrt" not in self._grid_cache:
            self._grid_cache["inv_sqrt"] = gram_inv_sqrt(self.grid_gram)
        return self._grid_cache["inv_sqrt"]

    def config(self) -> dict:
        return {
            "kind": self.kind,
            "count": self.count,
            "domain": list(self.domain),
            "order": self.order,
            "grid_size": self.grid.size,
        }


def eval_basis(kind: str, U: int, domain, grid: QuadratureGrid, order: int = BSPLINE_ORDER) -> BasisSystem:
    """Evaluate a B-spline or Fourier basis of ``U`` functions on ``grid``.

    B-splines use equally spaced interior knots. The Fourier system is
    ``1, sin, cos, sin(2.), cos(2.), ...`` scaled to be L2-orthonormal on
    the domain, truncated at ``U`` functions.
    """
    a, b = _check_domain(domain)
    if not np.allclose(grid.domain, (a, b)):
        raise ValueError(f"grid domain {grid.domain} does not match basis domain {(a, b)}")
    U = int(U)
    kind = kind.lower()
    if kind in ("bspline", "b-spline"):
        if order < 2:
            raise ValueError("B-spline order must be >= 2")
        if U < order:
            raise ValueError(f"a B-spline basis of order {order} needs U >= {order}, got {U}")
        knots = _bspline_knots(U, order, (a, b))
        B = _bspline_eval(knots, order, U, grid.points)
        gram = _bspline_gram(knots, order, U)
        kind = "bspline"
    elif kind == "fourier":
        if U < 1:
            raise ValueError("Fourier basis needs U >= 1")
        knots, order = None, None
        B = _fourier_eval(U, (a, b), grid.points)
        gram = np.eye(U)
    else:
        raise ValueError(f"unknown basis kind {kind!r}")
    if U > grid.size or np.linalg.matrix_rank(B) < U:
        raise IllConditionedBasisError(
            f"{U} basis functions cannot be resolved on a grid of {grid.size} points"
        )
    return BasisSystem(
        kind=kind,
        count=U,
        domain=(a, b),
        grid=grid,
        eval_matrix=B,
        gram=gram,
        gram_inv_sqrt=gram_inv_sqrt(gram),
        order=order,
        knots=knots,
    )
