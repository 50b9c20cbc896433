"""Bracketed root finding for strictly monotone functions.

Two schemes are used throughout the package:

* :func:`bisect_newton` -- bisection down to a fixed bracket width followed
  by a handful of safeguarded Newton refinements.  Used where robustness
  matters more than speed (forward evaluation of implicitly defined maps).
* :func:`newton_bracketed` -- Newton iteration that falls back to bisection
  whenever a step would leave the bracket ("rtsafe" style).  Used in hot
  loops with good starting guesses.

Vector variants operate elementwise on numpy arrays with per-element
brackets; they run the same iteration on the whole array.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

BISECT_WIDTH = 1e-14
MAX_NEWTON = 5


def bisect_newton(f, df, lo, hi, *, width=BISECT_WIDTH, max_newton=MAX_NEWTON):
    """Root of increasing f on [lo, hi] with f(lo) <= 0 <= f(hi).

    Bisects until hi - lo <= width, then applies at most ``max_newton``
    Newton refinements clamped to the final bracket.
    """
    flo = f(lo)
    if flo == 0.0:
        return lo
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(max_newton):
        d = df(x)
        if d == 0.0:
            break
        step = f(x) / d
        x_new = x - step
        if not (lo <= x_new <= hi):
            break
        if x_new == x:
            break
        x = x_new
    return x


def newton_bracketed(f, df, lo, hi, x0=None, *, tol=1e-15, max_iter=80):
    """Root of increasing f on [lo, hi], Newton with bisection fallback."""
    x = 0.5 * (lo + hi) if x0 is None else min(max(x0, lo), hi)
    for _ in range(max_iter):
        fx = f(x)
        if fx == 0.0:
            return x
        if fx < 0.0:
            lo = x
        else:
            hi = x
        d = df(x)
        x_new = x - fx / d if d != 0.0 else x
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= tol * (1.0 + abs(x)):
            return x_new
        x = x_new
    return x


def vec_bisect_newton(
    f: Callable[[np.ndarray], np.ndarray],
    df: Callable[[np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    *,
    width: float = BISECT_WIDTH,
    max_newton: int = MAX_NEWTON,
) -> np.ndarray:
    """Elementwise version of :func:`bisect_newton`.

    f must be increasing in each component with f(lo) <= 0 <= f(hi).
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    span = float(np.max(hi - lo, initial=0.0))
    n_bisect = max(0, int(np.ceil(np.log2(max(span, width) / width))))
    for _ in range(n_bisect):
        mid = 0.5 * (lo + hi)
        neg = f(mid) <= 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    x = 0.5 * (lo + hi)
    for _ in range(max_newton):
        d = df(x)
        step = np.where(d != 0.0, f(x) / np.where(d != 0.0, d, 1.0), 0.0)
        x_new = np.clip(x - step, lo, hi)
        if np.array_equal(x_new, x):
            break
        x = x_new
    return x


def vec_newton_from_above(
    f: Callable[[np.ndarray], np.ndarray],
    df: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    lo: np.ndarray | float,
    *,
    tol: float = 1e-16,
    max_iter: int = 60,
) -> np.ndarray:
    """Elementwise Newton for increasing convex f started where f(x0) >= 0.

    Convexity makes the iteration decrease monotonically onto the root, so
    no bracket maintenance is needed; ``lo`` only guards against rounding.
    """
    x = np.array(x0, dtype=float, copy=True)
    for _ in range(max_iter):
        d = df(x)
        step = f(x) / d
        x_new = np.maximum(x - step, lo)
        if float(np.max(np.abs(x_new - x), initial=0.0)) <= tol:
            x = x_new
            break
        x = x_new
    return x
