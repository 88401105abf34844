"""Reverse water-filling of a total source rate across the blocks of a frame.

Minimizes sum_j v_j 2^-R_j subject to sum_j R_j = total, R_j >= 0, with
the block variances v_j sorted descending. The solution is
R_j = [log2(v_j / lam)]^+ where the water level is the n-block geometric
mean lam = (v_1 ... v_n / 2^total)^(1/n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import EmptyFrame

__all__ = ["Allocation", "allocate", "water_levels", "waterfill_distortion", "waterfill_rates"]

_LN2 = math.log(2.0)
_WINDOW_RTOL = 1e-12


@dataclass(frozen=True)
class Allocation:
    rates: tuple
    water_level: float
    active_blocks: int

    @property
    def total(self) -> float:
        return math.fsum(self.rates)


def water_levels(variances, total):
    """Log water level and active-block count for each frame.

    Parameters
    ----------
    variances : array (F, K), rows nonincreasing
    total : float or array (F,), total rate per frame in bits

    Returns
    -------
    (log_level, n) : arrays of shape (F,)
        ``n == 0`` marks frames with zero total rate; their level is the
        largest variance.
    """
    V = np.atleast_2d(np.asarray(variances, dtype=float))
    F, K = V.shape
    if K == 0:
        raise EmptyFrame("frame has no blocks")
    total = np.broadcast_to(np.asarray(total, dtype=float), (F,))
    logV = np.log(V)
    m = np.arange(1, K + 1)
    # candidate levels for every active count m = 1..K
    cand = (np.cumsum(logV, axis=1) - total[:, None] * _LN2) / m
    # lam_m <= v_m holds exactly on a prefix m = 1..n
    ok = cand <= logV + _WINDOW_RTOL
    n = ok.sum(axis=1)
    n = np.maximum(n, 1)
    level = cand[np.arange(F), n - 1]
    zero = total <= 0.0
    if np.any(zero):
        n = np.where(zero, 0, n)
        level = np.where(zero, logV[:, 0], level)
    return level, n


def waterfill_rates(variances, total):
    """Rates (F, K) aligned with the descending variance columns."""
    V = np.atleast_2d(np.asarray(variances, dtype=float))
    level, _ = water_levels(V, total)
    return np.maximum((np.log(V) - level[:, None]) / _LN2, 0.0)


def waterfill_distortion(variances, total):
    """Per-frame sum_j v_j 2^-R_j = sum_j min(v_j, lam) at the optimal allocation."""
    V = np.atleast_2d(np.asarray(variances, dtype=float))
    level, _ = water_levels(V, total)
    return np.minimum(V, np.exp(level)[:, None]).sum(axis=1)


def allocate(sorted_variances, total_rate: float) -> Allocation:
    """Reverse water-fill ``total_rate`` bits over one frame.

    ``sorted_variances`` must be nonincreasing. The active count ``n``
    satisfies v_(n+1) < lam <= v_(n) with v_(K+1) = 0.
    """
    v = [float(x) for x in sorted_variances]
    K = len(v)
    if K == 0:
        raise EmptyFrame("frame has no blocks")
    if any(v[j] < v[j + 1] for j in range(K - 1)):
        raise ValueError("sorted_variances must be nonincreasing")
    if total_rate < 0.0:
        raise ValueError(f"total_rate must be nonnegative, got {total_rate}")
    if total_rate == 0.0:
        return Allocation(tuple([0.0] * K), v[0], 0)

    log_v = [math.log(x) for x in v]
    chosen = []
    cum = 0.0
    for m in range(1, K + 1):
        cum += log_v[m - 1]
        log_lam = (cum - total_rate * _LN2) / m
        upper = log_v[m - 1]
        lower = log_v[m] if m < K else -math.inf
        if lower < log_lam <= upper + _WINDOW_RTOL:
            chosen.append((m, log_lam))
    # exactly one window holds, up to rounding at a tie
    assert chosen, "no consistent water level found"
    n, log_lam = chosen[-1]
    rates = tuple(max((log_v[j] - log_lam) / _LN2, 0.0) if j < n else 0.0 for j in range(K))
    return Allocation(rates, math.exp(log_lam), n)
