"""Numerical differentiation and a quasi-Newton maximization driver.

All estimators maximize their objectives through :func:`maximize`, a BFGS
ascent with Armijo backtracking and central-difference gradients. The
derivatives are numerical throughout; no objective here provides analytic
gradients.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .exceptions import EvaluationError

_EPS = float(np.finfo(float).eps)
_GRAD_STEP = _EPS ** (1.0 / 3.0)
_HESS_STEP = _EPS**0.25

# Armijo sufficient-increase constant and backtracking shrink factor
_ARMIJO_C = 1e-4
_BACKTRACK = 0.5
_MIN_STEP = 1e-14

# ascent below this relative size, sustained over consecutive iterations,
# counts as step-size underflow: no meaningful ascent is left
_STAGNATION_EPS = 1e-9
_STAGNATION_ITERS = 10


@dataclass
class OptimResult:
    """Outcome of a maximization run.

    ``hessian``, when requested, is the Hessian of the negative objective
    at the maximizer (the observed information when the objective is a
    log-likelihood).
    """

    x: np.ndarray
    fun: float
    grad_norm: float
    iterations: int
    converged: bool
    hessian: Optional[np.ndarray] = None


def _probe(f, x, index):
    val = f(x)
    if not np.isfinite(val):
        raise EvaluationError(
            f"objective is non-finite at a probe point for coordinate {index}",
            index=index,
        )
    return float(val)


def numerical_gradient(f: Callable, x) -> np.ndarray:
    """Central-difference gradient with per-coordinate steps
    h_i = eps^(1/3) * max(1, |x_i|)."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = _GRAD_STEP * max(1.0, abs(x[i]))
        # re-derive h from representable endpoints to kill rounding in the divisor
        hi = (x[i] + h) - x[i]
        xp = x.copy()
        xm = x.copy()
        xp[i] = x[i] + hi
        xm[i] = x[i] - hi
        g[i] = (_probe(f, xp, i) - _probe(f, xm, i)) / (2.0 * hi)
    return g


def numerical_hessian(f: Callable, x) -> np.ndarray:
    """Central second differences with h_i = eps^(1/4) * max(1, |x_i|);
    the result is symmetrized as (H + H.T)/2."""
    x = np.asarray(x, dtype=float)
    k = x.size
    h = np.array([_HESS_STEP * max(1.0, abs(x[i])) for i in range(k)])
    f0 = _probe(f, x, -1)
    H = np.empty((k, k))
    fp = np.empty(k)
    fm = np.empty(k)
    for i in range(k):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h[i]
        xm[i] -= h[i]
        fp[i] = _probe(f, xp, i)
        fm[i] = _probe(f, xm, i)
        H[i, i] = (fp[i] - 2.0 * f0 + fm[i]) / h[i] ** 2
    for i in range(k):
        for j in range(i + 1, k):
            xpp = x.copy()
            xpm = x.copy()
            xmp = x.copy()
            xmm = x.copy()
            xpp[i] += h[i]
            xpp[j] += h[j]
            xpm[i] += h[i]
            xpm[j] -= h[j]
            xmp[i] -= h[i]
            xmp[j] += h[j]
            xmm[i] -= h[i]
            xmm[j] -= h[j]
            H[i, j] = (
                _probe(f, xpp, j)
                - _probe(f, xpm, j)
                - _probe(f, xmp, j)
                + _probe(f, xmm, j)
            ) / (4.0 * h[i] * h[j])
            H[j, i] = H[i, j]
    return 0.5 * (H + H.T)


def maximize(
    f: Callable,
    x0,
    tol: float = 1e-6,
    max_iter: int = 500,
    compute_hessian: bool = False,
) -> OptimResult:
    """BFGS ascent with backtracking line search.

    Convergence is declared when the sup-norm of the gradient falls below
    ``tol * max(1, |f(x)|)``, or when no meaningful ascent remains: the
    line-search step underflows, or the objective has stagnated (relative
    gains below 1e-9 over ten consecutive accepted iterations, which
    happens when the objective carries sub-tolerance numerical texture).
    Hitting ``max_iter`` yields a non-converged result rather than an
    exception. The run is deterministic given its inputs.
    """
    x = np.asarray(x0, dtype=float).copy()
    fx = f(x)
    if not np.isfinite(fx):
        raise EvaluationError("objective is not finite at the starting point")
    fx = float(fx)

    g = numerical_gradient(f, x)
    B = np.eye(x.size)  # approximate inverse of the negative Hessian
    converged = False
    iterations = 0
    stagnant = 0

    for iterations in range(max_iter + 1):
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        if gnorm <= tol * max(1.0, abs(fx)):
            converged = True
            break
        if stagnant >= _STAGNATION_ITERS:
            converged = True
            break
        if iterations == max_iter:
            break

        d = B @ g
        slope = float(g @ d)
        if slope <= 0.0:
            # curvature information went bad; restart from steepest ascent
            B = np.eye(x.size)
            d = g.copy()
            slope = float(g @ g)

        t = 1.0
        x_new = None
        while t >= _MIN_STEP:
            cand = x + t * d
            fc = f(cand)
            if np.isfinite(fc) and fc >= fx + _ARMIJO_C * t * slope:
                x_new = cand
                f_new = float(fc)
                break
            t *= _BACKTRACK
        if x_new is None:
            # step-size underflow: no further ascent is representable
            converged = True
            break

        if f_new - fx <= _STAGNATION_EPS * max(1.0, abs(fx)):
            stagnant += 1
        else:
            stagnant = 0

        g_new = numerical_gradient(f, x_new)
        s = x_new - x
        yv = g - g_new  # gradient change of the negative objective
        sy = float(s @ yv)
        if sy > 1e-10 * float(np.linalg.norm(s) * np.linalg.norm(yv) + 1e-300):
            rho = 1.0 / sy
            I = np.eye(x.size)
            V = I - rho * np.outer(s, yv)
            B = V @ B @ V.T + rho * np.outer(s, s)
        x, fx, g = x_new, f_new, g_new

    hess = None
    if compute_hessian:
        hess = -numerical_hessian(f, x)
    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    return OptimResult(
        x=x,
        fun=fx,
        grad_norm=gnorm,
        iterations=iterations,
        converged=converged,
        hessian=hess,
    )
