"""BFGS quasi-Newton minimization with a strong-Wolfe cubic-interpolation line search."""

from __future__ import annotations

import numpy as np
from scipy.optimize import OptimizeResult

from .exceptions import DivergedError, OptimizerStalledError


def _cubic_minimizer(a, fa, da, b, fb, db):
    """Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db), or None."""
    d1 = da + db - 3 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0:
        return None
    d2 = np.sign(b - a) * np.sqrt(disc)
    denom = db - da + 2 * d2
    if denom == 0:
        return None
    x = b - (b - a) * (db + d2 - d1) / denom
    return x if np.isfinite(x) else None


class _LineSearchFailed(Exception):
    pass


def wolfe_line_search(fun_grad, x, f0, g0, p, alpha0=1.0, c1=1e-4, c2=0.9, max_evals=40, alpha_max=1e10):
    """Find a step satisfying the strong Wolfe conditions along ``p``.

    Bracketing followed by a zoom phase whose trial steps come from cubic
    interpolation of the function and slope values at the bracket ends,
    safeguarded by bisection.

    Returns
    -------
    alpha, f, g, n_evals
    """
    d0 = float(g0 @ p)
    if not d0 < 0:
        raise _LineSearchFailed("search direction is not a descent direction")
    evals = 0

    def phi(alpha):
        nonlocal evals
        if evals >= max_evals:
            raise _LineSearchFailed(f"no acceptable step after {max_evals} trial steps")
        evals += 1
        f, g = fun_grad(x + alpha * p)
        f = float(f)
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            return np.inf, None, np.nan
        return f, g, float(g @ p)

    def zoom(lo, f_lo, d_lo, hi, f_hi, d_hi):
        while True:
            width = hi - lo
            trial = None
            if np.isfinite(f_hi) and np.isfinite(d_hi):
                trial = _cubic_minimizer(lo, f_lo, d_lo, hi, f_hi, d_hi)
            inner_lo, inner_hi = sorted((lo + 0.1 * width, hi - 0.1 * width))
            if trial is None or not (inner_lo <= trial <= inner_hi):
                trial = lo + 0.5 * width
            f_t, g_t, d_t = phi(trial)
            if f_t > f0 + c1 * trial * d0 or f_t >= f_lo:
                hi, f_hi, d_hi = trial, f_t, d_t
            else:
                if abs(d_t) <= -c2 * d0:
                    return trial, f_t, g_t
                if d_t * (hi - lo) >= 0:
                    hi, f_hi, d_hi = lo, f_lo, d_lo
                lo, f_lo, d_lo = trial, f_t, d_t
            if abs(hi - lo) <= 1e-16 * max(1.0, abs(lo)):
                raise _LineSearchFailed("line search bracket collapsed")

    a_prev, f_prev, d_prev = 0.0, f0, d0
    alpha = alpha0
    first = True
    while True:
        f_a, g_a, d_a = phi(alpha)
        if f_a > f0 + c1 * alpha * d0 or (not first and f_a >= f_prev):
            a, f, g = zoom(a_prev, f_prev, d_prev, alpha, f_a, d_a)
            return a, f, g, evals
        if abs(d_a) <= -c2 * d0:
            return alpha, f_a, g_a, evals
        if d_a >= 0:
            a, f, g = zoom(alpha, f_a, d_a, a_prev, f_prev, d_prev)
            return a, f, g, evals
        a_prev, f_prev, d_prev = alpha, f_a, d_a
        alpha = min(2 * alpha, alpha_max)
        first = False


def minimize_bfgs(fun_grad, x0, gtol=1e-6, ftol=1e-10, maxiter=500, c1=1e-4, c2=0.9, max_ls=40):
    """Minimize a smooth function given a callable returning ``(f, grad)``.

    Stops when the gradient infinity-norm drops below ``gtol``, when an
    accepted step lowers the objective by less than ``ftol * max(1, |f|)``,
    or after ``maxiter`` iterations.

    Returns
    -------
    OptimizeResult
        With fields ``x, fun, jac, nit, nfev, success, message, trace``;
        ``trace`` lists the objective after every accepted step.

    Raises
    ------
    DivergedError
        If the objective at ``x0`` is not finite.
    OptimizerStalledError
        If a line search fails; ``err.best`` holds the best iterate.
    """
    x = np.array(x0, dtype=float, copy=True)
    f, g = fun_grad(x)
    f = float(f)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise DivergedError(f"objective is not finite at the starting point (f={f})")
    n = x.size
    Hinv = np.eye(n)
    trace = [f]
    nfev = 1
    message = "maximum number of iterations reached"
    success = False
    nit = 0

    def result():
        return OptimizeResult(x=x, fun=f, jac=g, nit=nit, nfev=nfev, success=success,
                              message=message, trace=np.array(trace))

    for nit in range(1, maxiter + 1):
        if np.max(np.abs(g)) < gtol:
            message, success, nit = "gradient norm below tolerance", True, nit - 1
            break
        p = -Hinv @ g
        if not float(g @ p) < 0:
            # lost positive definiteness numerically; restart from steepest descent
            Hinv = np.eye(n)
            p = -g
        alpha0 = min(1.0, 1.0 / np.max(np.abs(g))) if nit == 1 else 1.0
        try:
            alpha, f_new, g_new, evals = wolfe_line_search(
                fun_grad, x, f, g, p, alpha0=alpha0, c1=c1, c2=c2, max_evals=max_ls
            )
        except _LineSearchFailed as exc:
            message = f"line search failed: {exc}"
            raise OptimizerStalledError(message, best=result()) from None
        nfev += evals
        s = alpha * p
        y = g_new - g
        decrease = f - f_new
        x = x + s
        f, g = f_new, g_new
        trace.append(f)
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if nit == 1:
                Hinv = np.eye(n) * (sy / float(y @ y))
            rho = 1.0 / sy
            Hy = Hinv @ y
            Hinv = (Hinv - rho * (np.outer(s, Hy) + np.outer(Hy, s))
                    + (rho * rho * float(y @ Hy) + rho) * np.outer(s, s))
        if decrease < ftol * max(1.0, abs(f)):
            message, success = "objective decrease below tolerance", True
            break
    else:
        nit = maxiter
    return result()
