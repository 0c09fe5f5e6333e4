"""Scalar and vectorized root finding / 1-D minimization.

Policy (uniform across the package): every scalar inversion is a bisection to
absolute tolerance ``1e-12`` with automatic bracket growth; 1-D minimizations
use golden-section search.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import SolveError

BISECT_TOL = 1e-12
_MAX_GROW = 200
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def bisect(fn: Callable[[float], float], lo: float, hi: float,
           tol: float = BISECT_TOL, max_iter: int = 240) -> float:
    """Root of ``fn`` on [lo, hi]; fn(lo) and fn(hi) must differ in sign."""
    flo = fn(lo)
    fhi = fn(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise SolveError(f"bisect: no sign change on [{lo!r}, {hi!r}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if fm == 0.0 or (hi - lo) <= tol:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_increasing(fn: Callable[[float], float], target: float,
                     lo: float, hi: float, tol: float = BISECT_TOL) -> float:
    """Solve fn(x) = target for increasing ``fn``, growing [lo, hi] as needed."""
    g = lambda x: fn(x) - target
    span = max(hi - lo, 1e-8)
    for _ in range(_MAX_GROW):
        if g(lo) <= 0.0:
            break
        hi = lo
        lo -= span
        span *= 2.0
    else:
        raise SolveError("solve_increasing: could not bracket from below")
    span = max(hi - lo, 1e-8)
    for _ in range(_MAX_GROW):
        if g(hi) >= 0.0:
            break
        lo = hi
        hi += span
        span *= 2.0
    else:
        raise SolveError("solve_increasing: could not bracket from above")
    return bisect(g, lo, hi, tol=tol)


def solve_increasing_vec(fn: Callable[[np.ndarray], np.ndarray],
                         target: np.ndarray, lo: float, hi: float,
                         tol: float = BISECT_TOL) -> np.ndarray:
    """Vectorized bisection for elementwise-increasing ``fn``.

    ``lo``/``hi`` are scalar bracket seeds grown until they cover every target.
    """
    target = np.asarray(target, dtype=float)
    span = max(hi - lo, 1e-8)
    for _ in range(_MAX_GROW):
        if np.all(fn(np.asarray([lo])) <= target.min()):
            break
        lo -= span
        span *= 2.0
    else:
        raise SolveError("solve_increasing_vec: could not bracket from below")
    span = max(hi - lo, 1e-8)
    for _ in range(_MAX_GROW):
        if np.all(fn(np.asarray([hi])) >= target.max()):
            break
        hi += span
        span *= 2.0
    else:
        raise SolveError("solve_increasing_vec: could not bracket from above")
    lo_a = np.full(target.shape, float(lo))
    hi_a = np.full(target.shape, float(hi))
    n_iter = int(np.ceil(np.log2(max((hi - lo) / tol, 2.0)))) + 2
    for _ in range(min(n_iter, 240)):
        mid = 0.5 * (lo_a + hi_a)
        below = fn(mid) < target
        lo_a = np.where(below, mid, lo_a)
        hi_a = np.where(below, hi_a, mid)
    return 0.5 * (lo_a + hi_a)


def golden_min(fn: Callable[[float], float], a: float, b: float,
               tol: float = 1e-10) -> tuple[float, float]:
    """Golden-section minimum of ``fn`` on [a, b]; returns (x*, fn(x*))."""
    if b < a:
        a, b = b, a
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc = fn(c)
    fd = fn(d)
    while (b - a) > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fn(d)
    x = c if fc <= fd else d
    return x, min(fc, fd)
