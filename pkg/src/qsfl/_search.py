"""One-dimensional minimization: coarse grid, then golden-section refinement."""

from __future__ import annotations

import math
import warnings

import numpy as np

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class NonUnimodalWarning(RuntimeWarning):
    """Objective sampled on the search grid has more than one local minimum."""


def golden_section(f, lo, hi, tol=1e-6, max_iter=200):
    """Minimize a unimodal ``f`` on [lo, hi]; returns (x, f(x))."""
    a, b = lo, hi
    x1 = b - _INV_PHI * (b - a)
    x2 = a + _INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_PHI * (b - a)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def count_local_minima(values) -> int:
    """Number of strict interior-or-endpoint local minima of a sampled curve."""
    y = np.asarray(values, dtype=float)
    # collapse plateaus so flat stretches are not counted repeatedly
    keep = np.concatenate(([True], np.diff(y) != 0.0))
    y = y[keep]
    if y.size < 3:
        return 1
    left = np.concatenate(([np.inf], y[:-1]))
    right = np.concatenate((y[1:], [np.inf]))
    return int(np.sum((y < left) & (y < right)))


def grid_then_golden(f, hi, points=512, tol=1e-6, label="objective"):
    """Global-ish minimum of ``f`` on [0, hi]: grid search then golden section.

    Returns ``(x, f(x), unimodal)``. A multi-modal grid raises a
    :class:`NonUnimodalWarning` (diagnostic only).
    """
    cache = {}

    def g(x):
        x = float(x)
        if x not in cache:
            cache[x] = f(x)
        return cache[x]

    if hi <= 0.0:
        return 0.0, g(0.0), True
    grid = np.linspace(0.0, hi, points)
    values = np.array([g(x) for x in grid])
    unimodal = count_local_minima(values) <= 1
    if not unimodal:
        warnings.warn(f"{label} is not unimodal on the search grid", NonUnimodalWarning,
                      stacklevel=3)
    i = int(np.argmin(values))
    lo_x = grid[max(i - 1, 0)]
    hi_x = grid[min(i + 1, points - 1)]
    x, fx = golden_section(g, lo_x, hi_x, tol=tol)
    if values[i] < fx:
        x, fx = float(grid[i]), float(values[i])
    return float(x), float(fx), unimodal
