import numpy as np
import pytest
from scipy.optimize import rosen, rosen_der

from sparse_mfpca.exceptions import DivergedError
from sparse_mfpca.optim import minimize_bfgs, wolfe_line_search


def fg(x):
    return rosen(x), rosen_der(x)


def test_rosenbrock():
    res = minimize_bfgs(fg, np.array([-1.2, 1.0, 0.8]), gtol=1e-8)
    np.testing.assert_allclose(res.x, 1.0, atol=1e-5)


def test_quadratic_exact():
    A = np.array([[3.0, 1.0], [1.0, 2.0]])
    b = np.array([1.0, -1.0])
    res = minimize_bfgs(lambda x: (0.5 * x @ A @ x - b @ x, A @ x - b), np.zeros(2), gtol=1e-10)
    np.testing.assert_allclose(res.x, np.linalg.solve(A, b), atol=1e-6)


def test_line_search_satisfies_strong_wolfe():
    x = np.array([-1.2, 1.0])
    f0, g0 = fg(x)
    p = -g0
    c1, c2 = 1e-4, 0.9
    out = wolfe_line_search(fg, x, f0, g0, p, alpha0=1e-3, c1=c1, c2=c2)
    alpha, f1, g1 = out[0], out[1], out[2]
    assert f1 <= f0 + c1 * alpha * g0 @ p
    assert abs(g1 @ p) <= c2 * abs(g0 @ p)


def test_diverged_start():
    with pytest.raises(DivergedError):
        minimize_bfgs(lambda x: (np.inf, np.zeros_like(x)), np.zeros(2))
