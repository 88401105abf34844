"""Constant channel rate with truncated channel inversion.

The channel rate R is fixed for every frame and gain. Above the gain
threshold t the transmitter inverts the channel, gamma = (2^R - 1) / alpha;
below it nothing is sent and the frame is in outage. For Rayleigh fading
the average power is (2^R - 1) E_1(t), so t is pinned by the budget and
only R is left to optimize.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from ._search import grid_then_golden
from .base import SchemeEstimator
from .exceptions import DomainError, RateOverBuffer
from .model import FrameTable, SourceModel, SystemConfig, frame_table
from .special import EULER_GAMMA, exp_int1_log
from .waterfill import allocate, waterfill_distortion, waterfill_rates

__all__ = [
    "CopacrSolution",
    "solve_threshold",
    "outage_threshold",
    "mean_distortion_given_rate",
    "optimize_rate",
    "rate_search_limit",
    "Copacr",
]

GRID_POINTS = 512
RATE_TOL = 1e-6


@dataclass(frozen=True)
class CopacrSolution:
    rate_star: float
    threshold_q: float
    outage_alpha: float
    mean_distortion: float
    unimodal: bool = True
    log_outage_alpha: float = -math.inf

    @property
    def outage_probability(self) -> float:
        return -math.expm1(-self.outage_alpha)


def _log_threshold(R: float, p_bar: float) -> float:
    """log t with E_1(t) = p_bar / (2^R - 1)."""
    y = p_bar / math.expm1(R * math.log(2.0))
    # E_1(t) >= -gamma - ln t everywhere, so E_1 exceeds y at lo
    lo = -EULER_GAMMA - y - 1.0
    hi = max(-EULER_GAMMA - y + 1.0, 0.0)
    while exp_int1_log(hi) >= y:
        hi = 2.0 * hi + 1.0
    return brentq(lambda u: exp_int1_log(u) - y, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)


def outage_threshold(R: float, p_bar: float) -> float:
    """Gain t below which the frame is dropped; 0 at R = 0."""
    if R == 0.0:
        return 0.0
    return math.exp(_log_threshold(R, p_bar))


def _q_from_log_t(R: float, log_t: float) -> float:
    log_q = math.log(math.expm1(R * math.log(2.0))) - log_t
    # t can underflow at very high power; q then exceeds the double range
    return math.exp(log_q) if log_q < 709.0 else math.inf


def solve_threshold(R: float, p_bar: float) -> float:
    """q1 = (2^R - 1) / t where (2^R - 1) E_1(t) = p_bar."""
    if not (R > 0.0 and math.isfinite(R)):
        raise DomainError(f"rate must be positive and finite, got {R}")
    if not (p_bar > 0.0 and math.isfinite(p_bar)):
        raise DomainError(f"power budget must be positive and finite, got {p_bar}")
    return _q_from_log_t(R, _log_threshold(R, p_bar))


def rate_search_limit(cfg: SystemConfig) -> float:
    return min(cfg.buffer_cap / cfg.bandwidth_ratio, math.log2(1.0 + 10.0 * cfg.power_budget))


def fixed_rate_distortion(R: float, outage_alpha: float, frames: FrameTable,
                          mean_variance: float) -> float:
    """E[D] for a constant channel rate whose outage event is alpha < outage_alpha."""
    K = frames.frame_blocks
    if R == 0.0:
        return mean_variance
    served = frames.expect(waterfill_distortion(frames.variances, K * R)) / K
    p_ok = math.exp(-outage_alpha)
    return mean_variance * -math.expm1(-outage_alpha) + p_ok * served


def _check_rate(R: float, cfg: SystemConfig):
    if R < 0.0:
        raise DomainError(f"rate must be nonnegative, got {R}")
    if cfg.bandwidth_ratio * R > cfg.buffer_cap * (1.0 + 1e-12):
        raise RateOverBuffer(f"b*R = {cfg.bandwidth_ratio * R:g} exceeds B_max = {cfg.buffer_cap:g}")


def mean_distortion_given_rate(R: float, source: SourceModel, cfg: SystemConfig,
                               frames: FrameTable = None) -> float:
    _check_rate(R, cfg)
    if frames is None:
        frames = frame_table(source, cfg.frame_blocks)
    t = outage_threshold(R, cfg.power_budget)
    return fixed_rate_distortion(cfg.bandwidth_ratio * R, t, frames, source.mean_variance)


def optimize_rate(source: SourceModel, cfg: SystemConfig, frames: FrameTable = None,
                  points: int = GRID_POINTS) -> CopacrSolution:
    if frames is None:
        frames = frame_table(source, cfg.frame_blocks)
    obj = lambda R: mean_distortion_given_rate(R, source, cfg, frames)
    R, ed, unimodal = grid_then_golden(obj, rate_search_limit(cfg), points=points, tol=RATE_TOL,
                                       label="COPACR E[D](R)")
    if R == 0.0:
        return CopacrSolution(0.0, math.inf, 0.0, ed, unimodal)
    log_t = _log_threshold(R, cfg.power_budget)
    return CopacrSolution(R, _q_from_log_t(R, log_t), math.exp(log_t), ed, unimodal, log_t)


def fixed_rate_batch(V, R: float, b: float):
    """Water-filled rates for K*b*R bits per frame."""
    K = V.shape[1]
    return waterfill_rates(V, K * b * R)


class Copacr(SchemeEstimator):
    """Fixed channel rate, truncated channel inversion power.

    Fitted attributes: ``solution_`` (CopacrSolution), ``rate_star_``,
    ``outage_alpha_``, ``mean_distortion_``, ``rsnr_db_``.
    """

    scheme_name = "COPACR"

    def _solve(self):
        self.solution_ = optimize_rate(self.source_, self.config_, self.frames_)
        self.rate_star_ = self.solution_.rate_star
        self.outage_alpha_ = self.solution_.outage_alpha

    def _closed_form(self):
        return self.solution_.mean_distortion

    def _power(self, alpha):
        R, t = self.solution_.rate_star, self.solution_.outage_alpha
        alpha = np.asarray(alpha, dtype=float)
        with np.errstate(divide="ignore"):
            inv = math.expm1(R * math.log(2.0)) / alpha
        return np.where((alpha >= t) & (R > 0.0), inv, 0.0)

    def _policy_log(self, v_sorted, log_alpha):
        s = self.solution_
        rates = allocate(v_sorted, len(v_sorted) * self.config_.bandwidth_ratio * s.rate_star).rates
        served = s.rate_star > 0.0 and log_alpha >= s.log_outage_alpha
        return rates, s.rate_star, math.expm1(s.rate_star * math.log(2.0)) if served else 0.0

    def _policy_batch(self, V, alpha):
        R = self.solution_.rate_star
        rates = fixed_rate_batch(V, R, self.config_.bandwidth_ratio)
        return rates, np.full(V.shape[0], R), self._power(alpha)

    def _breakpoints(self, v_sorted):
        lt = self.solution_.log_outage_alpha
        return [lt] if math.isfinite(lt) else []

    def _diagnostics(self):
        s = self.solution_
        return {
            "rate_star": s.rate_star,
            "threshold_q": s.threshold_q,
            "outage_alpha": s.outage_alpha,
            "unimodal": s.unimodal,
        }
