"""Capacity-tracking rate adaptation at constant transmit power.

Power is always the budget P. The frame's total source rate follows the
channel, min(K b log2(1 + alpha P), K B_max), and is split by reverse
water-filling. With m active blocks the water level is
(v_1..v_m / (1 + alpha P)^(bK))^(1/m), which makes the mean distortion a
sum of generalized exponential integrals of order bK/m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import SchemeEstimator
from .model import FrameState, FrameTable, PolicyDecision, SourceModel, SystemConfig, frame_table
from .special import exp_int
from .waterfill import allocate, waterfill_distortion, waterfill_rates

__all__ = [
    "ScoracpRegions",
    "regions",
    "active_blocks",
    "policy",
    "mean_distortion",
    "asymptotic_constants",
    "Scoracp",
]

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class ScoracpRegions:
    c: float
    d1: tuple
    d2: tuple


def _x_values(V, beta):
    """x_{1,m} and x_{2,m} per frame, shape (F, K); x_{2,K} = inf."""
    F, K = V.shape
    logV = np.log(V)
    m = np.arange(1, K + 1, dtype=float)
    cum = np.cumsum(logV, axis=1)
    lx1 = cum / beta - m / beta * logV
    nxt = np.concatenate([logV[:, 1:], np.full((F, 1), -np.inf)], axis=1)
    with np.errstate(invalid="ignore"):
        lx2 = cum / beta - m / beta * nxt
    lx2[:, -1] = np.inf
    return np.exp(lx1), np.exp(lx2), cum


def _buffer_gain(cfg: SystemConfig) -> float:
    if math.isinf(cfg.buffer_cap):
        return math.inf
    return math.expm1(cfg.buffer_cap / cfg.bandwidth_ratio * _LN2) / cfg.power_budget


def regions(frame: FrameState, cfg: SystemConfig) -> ScoracpRegions:
    """Gain windows [d1_m, d2_m) with m active blocks, and the buffer gain c."""
    V = np.asarray(frame.sorted_variances, dtype=float)[None, :]
    x1, x2, _ = _x_values(V, cfg.bandwidth_ratio * V.shape[1])
    P = cfg.power_budget
    return ScoracpRegions(_buffer_gain(cfg), tuple(((x1[0] - 1.0) / P).tolist()),
                          tuple(((x2[0] - 1.0) / P).tolist()))


def active_blocks(reg: ScoracpRegions, alpha: float) -> int:
    """Window index m with d1_m <= alpha < d2_m (0 when alpha is 0)."""
    if alpha <= 0.0:
        return 0
    return sum(1 for d in reg.d1 if d <= alpha)


def _total_rate(alpha, cfg: SystemConfig):
    K, b = cfg.frame_blocks, cfg.bandwidth_ratio
    total = K * b * np.log2(1.0 + np.asarray(alpha, dtype=float) * cfg.power_budget)
    return np.minimum(total, K * cfg.buffer_cap)


def policy(frame: FrameState, alpha: float, cfg: SystemConfig) -> PolicyDecision:
    """Rates (descending-variance order) at constant power."""
    return _policy_scalar(tuple(frame.sorted_variances), alpha, cfg)


def _policy_scalar(v, alpha, cfg):
    total = float(_total_rate(alpha, cfg))
    rates = allocate(v, total).rates
    return PolicyDecision(rates, total / (cfg.frame_blocks * cfg.bandwidth_ratio), cfg.power_budget)


def _frame_distortion_sums(frames: FrameTable, cfg: SystemConfig):
    """Per-frame E_alpha[sum_j v_j 2^-R_j] (not divided by K)."""
    V = frames.variances
    F, K = V.shape
    b, P = cfg.bandwidth_ratio, cfg.power_budget
    beta = b * K
    x1, x2, cum = _x_values(V, beta)
    d1 = (x1 - 1.0) / P
    d2 = (x2 - 1.0) / P
    c = _buffer_gain(cfg)
    tail = V.sum(axis=1)[:, None] - np.cumsum(V, axis=1)
    out = np.zeros(F)
    for f in range(F):
        acc = 0.0
        for j in range(K):
            m = j + 1
            lo = d1[f, j]
            hi = min(d2[f, j], c)
            if not hi > lo:
                continue
            p = beta / m
            scale = m * math.exp(cum[f, j] / m) / P

            def F_(d):
                if math.isinf(d):
                    return 0.0
                return (scale * math.exp(-d) * (1.0 + d * P) ** (1.0 - p)
                        * exp_int(p, 1.0 / P + d, scaled=True))

            e_hi = 0.0 if math.isinf(hi) else math.exp(-hi)
            acc += F_(lo) - F_(hi) + tail[f, j] * (math.exp(-lo) - e_hi)
        out[f] = acc
    if math.isfinite(c):
        out += waterfill_distortion(V, K * cfg.buffer_cap) * math.exp(-c)
    return out


def mean_distortion(source: SourceModel, cfg: SystemConfig, frames: FrameTable = None) -> float:
    """Closed-form E[D] over Rayleigh gains and all frames."""
    if frames is None:
        frames = frame_table(source, cfg.frame_blocks)
    return frames.expect(_frame_distortion_sums(frames, cfg)) / cfg.frame_blocks


def asymptotic_constants(source: SourceModel, cfg: SystemConfig, frames: FrameTable = None):
    """High-power constants (V, W) with E[D] ~ V / P (b > 1) or W / P (b = 1).

    V diverges at b = 1 and is returned as inf there. W keeps its
    E_1(x_{1,K} / P) term, evaluated at the configured power budget.
    """
    if frames is None:
        frames = frame_table(source, cfg.frame_blocks)
    V = frames.variances
    F, K = V.shape
    b = cfg.bandwidth_ratio
    beta = b * K
    x1, x2, cum = _x_values(V, beta)
    tail = V.sum(axis=1)[:, None] - np.cumsum(V, axis=1)
    common = np.zeros(F)
    for j in range(K - 1):
        m = j + 1
        p = beta / m
        geo = np.exp(cum[:, j] / m)
        common += (m * geo * (x1[:, j] ** (1.0 - p) - x2[:, j] ** (1.0 - p)) / (p - 1.0)
                   + (x2[:, j] - x1[:, j]) * tail[:, j])
    geo_k = np.exp(cum[:, -1] / K)
    if b > 1.0:
        v_last = K * geo_k * x1[:, -1] ** (1.0 - b) / (b - 1.0)
        v_const = frames.expect(common + v_last) / K
    else:
        v_const = math.inf
    e1 = np.array([exp_int(1.0, x / cfg.power_budget) for x in x1[:, -1]])
    w_const = frames.expect(common + K * e1 * geo_k) / K
    return v_const, w_const


class Scoracp(SchemeEstimator):
    """Channel-tracking rate adaptation at fixed power.

    Fitted attributes: ``mean_distortion_``, ``rsnr_db_``,
    ``buffer_gain_`` (gain above which the buffer binds).
    """

    scheme_name = "SCORACP"
    no_outage = True

    def _solve(self):
        self.buffer_gain_ = _buffer_gain(self.config_)

    def _closed_form(self):
        return mean_distortion(self.source_, self.config_, self.frames_)

    def _policy_scalar(self, v_sorted, alpha):
        return _policy_scalar(v_sorted, alpha, self.config_)

    def _policy_log(self, v_sorted, log_alpha):
        d = _policy_scalar(v_sorted, math.exp(log_alpha), self.config_)
        return d.source_rates, d.channel_rate, math.exp(log_alpha) * self.config_.power_budget

    def _policy_batch(self, V, alpha):
        cfg = self.config_
        total = _total_rate(alpha, cfg)
        rates = waterfill_rates(V, total)
        R = total / (cfg.frame_blocks * cfg.bandwidth_ratio)
        return rates, R, np.full(V.shape[0], cfg.power_budget)

    def _breakpoints(self, v_sorted):
        reg = regions(FrameState((), tuple(v_sorted), 1.0), self.config_)
        pts = [d for d in reg.d1 if d > 0.0] + [reg.c]
        return sorted(set(math.log(p) for p in pts if 0.0 < p < math.inf))

    def _diagnostics(self):
        return {"buffer_gain": self.buffer_gain_}
