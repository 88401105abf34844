"""Constant channel rate at constant power.

Power is always the budget, so the frame is in outage exactly when
alpha < (2^R - 1) / P. Only the channel rate R is optimized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._search import grid_then_golden
from .base import SchemeEstimator
from .copacr import GRID_POINTS, RATE_TOL, _check_rate, fixed_rate_batch, fixed_rate_distortion, rate_search_limit
from .model import FrameTable, PolicyDecision, SourceModel, SystemConfig, frame_table
from .waterfill import allocate

__all__ = ["CrcpSolution", "outage_threshold", "mean_distortion_given_rate", "optimize_rate",
           "mean_distortion", "Crcp"]


@dataclass(frozen=True)
class CrcpSolution:
    rate_star: float
    outage_alpha: float
    mean_distortion: float
    unimodal: bool = True

    @property
    def outage_probability(self) -> float:
        return -math.expm1(-self.outage_alpha)


def outage_threshold(R: float, p_bar: float) -> float:
    return math.expm1(R * math.log(2.0)) / p_bar


def mean_distortion_given_rate(R: float, source: SourceModel, cfg: SystemConfig,
                               frames: FrameTable = None) -> float:
    _check_rate(R, cfg)
    if frames is None:
        frames = frame_table(source, cfg.frame_blocks)
    t = outage_threshold(R, cfg.power_budget)
    return fixed_rate_distortion(cfg.bandwidth_ratio * R, t, frames, source.mean_variance)


def optimize_rate(source: SourceModel, cfg: SystemConfig, frames: FrameTable = None,
                  points: int = GRID_POINTS) -> CrcpSolution:
    if frames is None:
        frames = frame_table(source, cfg.frame_blocks)
    obj = lambda R: mean_distortion_given_rate(R, source, cfg, frames)
    R, ed, unimodal = grid_then_golden(obj, rate_search_limit(cfg), points=points, tol=RATE_TOL,
                                       label="CRCP E[D](R)")
    return CrcpSolution(R, outage_threshold(R, cfg.power_budget), ed, unimodal)


def mean_distortion(sol: CrcpSolution, source: SourceModel, cfg: SystemConfig,
                    frames: FrameTable = None) -> float:
    return mean_distortion_given_rate(sol.rate_star, source, cfg, frames)


class Crcp(SchemeEstimator):
    """Fixed channel rate at fixed power.

    Fitted attributes: ``solution_`` (CrcpSolution), ``rate_star_``,
    ``outage_alpha_``, ``mean_distortion_``, ``rsnr_db_``.
    """

    scheme_name = "CRCP"

    def _solve(self):
        self.solution_ = optimize_rate(self.source_, self.config_, self.frames_)
        self.rate_star_ = self.solution_.rate_star
        self.outage_alpha_ = self.solution_.outage_alpha

    def _closed_form(self):
        return mean_distortion(self.solution_, self.source_, self.config_, self.frames_)

    def _policy_scalar(self, v_sorted, alpha):
        rates, R, _ = self._policy_log(v_sorted, -math.inf)
        return PolicyDecision(rates, R, self.config_.power_budget)

    def _policy_log(self, v_sorted, log_alpha):
        R = self.solution_.rate_star
        rates = allocate(v_sorted, len(v_sorted) * self.config_.bandwidth_ratio * R).rates
        return rates, R, math.exp(log_alpha) * self.config_.power_budget

    def _policy_batch(self, V, alpha):
        R = self.solution_.rate_star
        rates = fixed_rate_batch(V, R, self.config_.bandwidth_ratio)
        n = V.shape[0]
        return rates, np.full(n, R), np.full(n, self.config_.power_budget)

    def _breakpoints(self, v_sorted):
        t = self.solution_.outage_alpha
        return [math.log(t)] if t > 0.0 else []

    def _diagnostics(self):
        s = self.solution_
        return {"rate_star": s.rate_star, "outage_alpha": s.outage_alpha, "unimodal": s.unimodal}
