"""Grid search with golden-section refinement, and a bracketed root finder."""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy import optimize


def grid_argmax(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    n: int = 4096,
    tol: float = 1e-8,
) -> tuple[float, float]:
    """Maximise a vectorised ``f`` on ``[lo, hi]``.

    The coarse argmax on ``n`` points is polished by golden-section search in
    the two neighbouring cells.  Returns ``(x, f(x))``; ties on the grid go to
    the lowest price.
    """
    x = np.linspace(lo, hi, n)
    y = np.asarray(f(x), dtype=float)
    i = int(np.argmax(y))
    best_x, best_y = float(x[i]), float(y[i])
    if 0 < i < n - 1 and y[i] > y[i - 1] and y[i] > y[i + 1]:
        xa, xb, xc = float(x[i - 1]), float(x[i]), float(x[i + 1])
        g = lambda t: -float(f(np.asarray(t)))
        xr = optimize.golden(g, brack=(xa, xb, xc), tol=tol)
        yr = -g(xr)
        if yr >= best_y:
            best_x, best_y = float(xr), yr
    return best_x, best_y


def bisect_root(
    g: Callable[[float], float], lo: float, hi: float, xtol: float = 1e-12
) -> float:
    """Root of ``g`` in a sign-changing bracket (plain bisection)."""
    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if np.sign(glo) == np.sign(ghi):
        raise ValueError("bracket does not change sign")
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm == 0.0:
            return mid
        if np.sign(gm) == np.sign(glo):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)
