"""Jointly optimal source-rate, channel-rate and power adaptation.

For a frame with descending variances v_1..v_K and gain alpha the policy
is described by a Lagrange multiplier ``lam`` on average power. Gains in
[d1_m, d2_m) activate m blocks. Below c_m the channel runs at capacity with
water level lam2 = (v_1..v_m)^(1/(m+bK)) (lam / (alpha bK))^(bK/(m+bK));
at or above c_m the buffer binds and the rate is pinned to B_max / b.

All region boundaries scale linearly with ``lam``, which can be far below
the smallest double at high power with a finite buffer, so every
quantity here is carried as a logarithm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .base import SchemeEstimator
from .exceptions import BracketingFailure, UnsolvedLambda
from .model import FrameState, FrameTable, PolicyDecision, SourceModel, SystemConfig, frame_table
from .special import ein, exp_int, exp_int1_log, lower_gamma_scaled
from .waterfill import allocate, waterfill_distortion, waterfill_rates

__all__ = [
    "ScorpaRegions",
    "ScorpaSolution",
    "regions",
    "policy",
    "expected_power",
    "solve_lambda",
    "mean_distortion",
    "Scorpa",
]

_LN2 = math.log(2.0)
_LOG_BRACKET = (math.log(1e-12), math.log(1e12))
# saturated finite-buffer configs need log(lambda) near -P / (2^(B/b) - 1)
_LOG_FLOOR = -1e300
_POWER_RTOL = 1e-6
# beyond this argument the lower incomplete gamma equals Gamma(t) in double precision
_LOG_GAMMA_SATURATE = math.log(745.0)


@dataclass(frozen=True)
class ScorpaRegions:
    c: tuple
    d1: tuple
    d2: tuple
    a1: tuple
    a2: tuple
    e1: tuple
    e2: tuple


@dataclass(frozen=True)
class ScorpaSolution:
    log_lambda: float
    achieved_power: float
    target_power: float = float("nan")

    @property
    def lam(self) -> float:
        return math.exp(self.log_lambda)


def _log_regions(logV, L, b, bmax):
    """Log region boundaries, each of shape (F, K); column m-1 is window m."""
    F, K = logV.shape
    beta = b * K
    log_beta = math.log(beta)
    m = np.arange(1, K + 1, dtype=float)
    cum = np.cumsum(logV, axis=1)
    base = L - log_beta + cum / beta
    ld1 = base - (m + beta) / beta * logV
    nxt = np.concatenate([logV[:, 1:], np.full((F, 1), -np.inf)], axis=1)
    with np.errstate(invalid="ignore"):
        ld2 = base - (m + beta) / beta * nxt
    ld2[:, -1] = np.inf
    if math.isinf(bmax):
        lc = np.full((F, K), np.inf)
    else:
        lc = L - log_beta + (m + beta) / m * (bmax / b) * _LN2 - cum / m
    la1 = np.maximum(ld1, lc)
    la2 = np.maximum(ld2, lc)
    le1 = ld1
    le2 = np.maximum(np.minimum(lc, ld2), le1)
    return dict(d1=ld1, d2=ld2, c=lc, a1=la1, a2=la2, e1=le1, e2=le2, cum=cum)


def regions(frame: FrameState, lam: float, cfg: SystemConfig) -> ScorpaRegions:
    """Region boundaries c_m, d1_m, d2_m and the clipped limits a, e for one frame."""
    if not lam > 0.0:
        raise ValueError(f"lambda must be positive, got {lam}")
    logV = np.log(np.asarray(frame.sorted_variances, dtype=float))[None, :]
    r = _log_regions(logV, math.log(lam), cfg.bandwidth_ratio, cfg.buffer_cap)
    out = {k: tuple(np.exp(r[k][0]).tolist()) for k in ("c", "d1", "d2", "a1", "a2", "e1", "e2")}
    return ScorpaRegions(**out)


def _e1_diff(l1, l2):
    """E_1(x1) - E_1(x2) for x1 <= x2 given as logs."""
    if l2 == math.inf:
        return exp_int1_log(l1)
    x2 = math.exp(l2)
    if x2 <= 2.0:
        return (l2 - l1) + ein(math.exp(l1)) - ein(x2)
    return exp_int1_log(l1) - exp_int(1.0, x2)


def _gamma_lower_weighted(t, lx, L, w):
    """lam^-w * gamma_lower(t, x) with x = exp(lx), lam = exp(L)."""
    if lx >= _LOG_GAMMA_SATURATE:
        return math.gamma(t) * math.exp(-w * L)
    return math.exp(t * lx - w * L) * lower_gamma_scaled(t, math.exp(lx))


def _exp_neg_diff(l1, l2):
    """exp(-x1) - exp(-x2) for x1 <= x2 given as logs."""
    x1 = math.exp(l1)
    if l2 == math.inf:
        return math.exp(-x1)
    x2 = math.exp(l2)
    return math.exp(-x1) * -math.expm1(x1 - x2)


def _frame_arrays(frames: FrameTable):
    V = frames.variances
    return V, np.log(V)


def expected_power(log_lambda: float, frames: FrameTable, cfg: SystemConfig) -> float:
    """Frame-averaged E[gamma] of the policy at multiplier exp(log_lambda), Rayleigh gain."""
    V, logV = _frame_arrays(frames)
    F, K = V.shape
    b, bmax = cfg.bandwidth_ratio, cfg.buffer_cap
    beta = b * K
    L = log_lambda
    r = _log_regions(logV, L, b, bmax)
    m = np.arange(1, K + 1, dtype=float)
    coef = np.exp((r["cum"] + m * math.log(beta)) / (m + beta))
    buf = math.expm1(bmax / b * _LN2) if math.isfinite(bmax) else 0.0
    per_frame = np.zeros(F)
    le1, le2, la1, la2 = r["e1"], r["e2"], r["a1"], r["a2"]
    for f in range(F):
        acc = 0.0
        for j in range(K):
            if le2[f, j] > le1[f, j]:
                t = m[j] / (m[j] + beta)
                g = (_gamma_lower_weighted(t, le2[f, j], L, t)
                     - _gamma_lower_weighted(t, le1[f, j], L, t))
                acc += coef[f, j] * g - _e1_diff(le1[f, j], le2[f, j])
            if la2[f, j] > la1[f, j]:
                acc += buf * _e1_diff(la1[f, j], la2[f, j])
        per_frame[f] = acc
    return frames.expect(per_frame)


def solve_lambda(source: SourceModel, cfg: SystemConfig, frames: FrameTable = None) -> ScorpaSolution:
    """Find the multiplier that spends exactly the average power budget.

    Root-finds on log(lambda) inside [1e-12, 1e12], widening the bracket
    geometrically when the budget needs a multiplier outside it.
    """
    if frames is None:
        frames = frame_table(source, cfg.frame_blocks)
    target = cfg.power_budget

    def resid(L):
        with np.errstate(over="ignore"):
            return expected_power(L, frames, cfg) - target

    lo, hi = _LOG_BRACKET
    f_lo, f_hi = resid(lo), resid(hi)
    while f_hi > 0.0:
        hi = 2.0 * hi
        if hi > 1e4:
            raise BracketingFailure("power stays above budget for every multiplier")
        f_hi = resid(hi)
    while not f_lo > 0.0:
        lo = 2.0 * lo
        if lo < _LOG_FLOOR:
            raise BracketingFailure(
                f"power budget {target:g} not reachable for log(lambda) >= {_LOG_FLOOR:g}")
        f_lo = resid(lo)
    if math.isinf(f_lo):
        # tighten from below until the residual is finite
        mid = 0.5 * (lo + hi)
        while math.isinf(resid(mid)):
            lo = mid
            mid = 0.5 * (lo + hi)
        lo = mid if resid(mid) > 0.0 else lo
    L = brentq(resid, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)
    achieved = expected_power(L, frames, cfg)
    if abs(achieved - target) > _POWER_RTOL * target:
        raise BracketingFailure(
            f"power solve ended at {achieved!r}, target {target!r} (log lambda {L!r})")
    return ScorpaSolution(L, achieved, target)


def _frame_distortion_sums(log_lambda, frames: FrameTable, cfg: SystemConfig):
    """Per-frame E_alpha[sum_j v_j 2^-R_j] under the policy (not divided by K)."""
    V, logV = _frame_arrays(frames)
    F, K = V.shape
    b, bmax = cfg.bandwidth_ratio, cfg.buffer_cap
    beta = b * K
    L = log_lambda
    r = _log_regions(logV, L, b, bmax)
    m = np.arange(1, K + 1, dtype=float)
    coef = m * np.exp((r["cum"] - beta * math.log(beta)) / (m + beta))
    total_v = V.sum(axis=1)
    tail = total_v[:, None] - np.cumsum(V, axis=1)
    floor = waterfill_distortion(V, K * bmax) if math.isfinite(bmax) else np.zeros(F)
    le1, le2, la1, la2 = r["e1"], r["e2"], r["a1"], r["a2"]
    out = total_v * -np.expm1(-np.exp(r["d1"][:, 0]))
    for f in range(F):
        acc = 0.0
        for j in range(K):
            if le2[f, j] > le1[f, j]:
                t = m[j] / (m[j] + beta)
                g = (_gamma_lower_weighted(t, le2[f, j], L, t - 1.0)
                     - _gamma_lower_weighted(t, le1[f, j], L, t - 1.0))
                acc += coef[f, j] * g + tail[f, j] * _exp_neg_diff(le1[f, j], le2[f, j])
            if la2[f, j] > la1[f, j]:
                acc += floor[f] * _exp_neg_diff(la1[f, j], la2[f, j])
        out[f] += acc
    return out


def mean_distortion(source: SourceModel, cfg: SystemConfig, sol: ScorpaSolution,
                    frames: FrameTable = None) -> float:
    """Closed-form E[D] over Rayleigh gains and all frames."""
    if frames is None:
        frames = frame_table(source, cfg.frame_blocks)
    sums = _frame_distortion_sums(sol.log_lambda, frames, cfg)
    return frames.expect(sums) / cfg.frame_blocks


def policy(frame: FrameState, alpha: float, sol: ScorpaSolution, cfg: SystemConfig) -> PolicyDecision:
    """Rates (descending-variance order), channel rate and power at gain ``alpha``."""
    if sol is None:
        raise UnsolvedLambda("solve_lambda must run before policy queries")
    la = math.log(alpha) if alpha > 0.0 else -math.inf
    rates, R, snr = _policy_log(tuple(frame.sorted_variances), la, sol.log_lambda, cfg)
    return PolicyDecision(rates, R, snr / alpha if snr > 0.0 else 0.0)


def _policy_log(v, la, L, cfg):
    """(rates, channel rate, alpha * gamma) at log gain ``la``."""
    K = len(v)
    b, bmax = cfg.bandwidth_ratio, cfg.buffer_cap
    beta = b * K
    log_beta = math.log(beta)
    logv = [math.log(x) for x in v]
    if la <= L - log_beta - logv[0]:
        return tuple([0.0] * K), 0.0, 0.0
    cum = 0.0
    m = 0
    cum_m = 0.0
    for j in range(K):
        cum += logv[j]
        ld1 = L - log_beta + cum / beta - (j + 1 + beta) / beta * logv[j]
        if ld1 <= la:
            m, cum_m = j + 1, cum
    if math.isfinite(bmax):
        lc = L - log_beta + (m + beta) / m * (bmax / b) * _LN2 - cum_m / m
        if la >= lc:
            return allocate(v, K * bmax).rates, bmax / b, math.expm1(bmax / b * _LN2)
    log_lam2 = (cum_m + beta * (L - la - log_beta)) / (m + beta)
    rates = tuple(max((lv - log_lam2) / _LN2, 0.0) for lv in logv)
    snr = math.expm1(la + log_beta + log_lam2 - L)
    return rates, math.fsum(rates) / (K * b), snr


def _policy_batch(V, alpha, L, cfg):
    n, K = V.shape
    b, bmax = cfg.bandwidth_ratio, cfg.buffer_cap
    beta = b * K
    log_beta = math.log(beta)
    logV = np.log(V)
    with np.errstate(divide="ignore"):
        la = np.log(alpha)
    r = _log_regions(logV, L, b, bmax)
    m = (r["d1"] <= la[:, None]).sum(axis=1)
    active = m > 0
    idx = np.maximum(m, 1) - 1
    rows = np.arange(n)
    cum_m = r["cum"][rows, idx]
    mf = idx + 1.0
    log_lam2 = (cum_m + beta * (L - la - log_beta)) / (mf + beta)
    rates = np.maximum((logV - log_lam2[:, None]) / _LN2, 0.0)
    with np.errstate(over="ignore", invalid="ignore"):
        power = np.expm1(la + log_beta + log_lam2 - L) / alpha
    if math.isfinite(bmax):
        buffered = active & (la >= r["c"][rows, idx])
        if np.any(buffered):
            rates[buffered] = waterfill_rates(V[buffered], K * bmax)
            power[buffered] = math.expm1(bmax / b * _LN2) / alpha[buffered]
    rates[~active] = 0.0
    power = np.where(active, power, 0.0)
    R = rates.sum(axis=1) / (K * b)
    return rates, R, power


class Scorpa(SchemeEstimator):
    """Source- and channel-optimized rate and power adaptation.

    Fitted attributes: ``solution_`` (ScorpaSolution), ``log_lambda_``,
    ``mean_distortion_``, ``rsnr_db_``.
    """

    scheme_name = "SCORPA"
    no_outage = True

    def _solve(self):
        self.solution_ = solve_lambda(self.source_, self.config_, self.frames_)
        self.log_lambda_ = self.solution_.log_lambda

    def _closed_form(self):
        return mean_distortion(self.source_, self.config_, self.solution_, self.frames_)

    def _policy_log(self, v_sorted, log_alpha):
        return _policy_log(v_sorted, log_alpha, self.solution_.log_lambda, self.config_)

    def _policy_batch(self, V, alpha):
        return _policy_batch(V, alpha, self.solution_.log_lambda, self.config_)

    def _breakpoints(self, v_sorted):
        logV = np.log(np.asarray(v_sorted, dtype=float))[None, :]
        r = _log_regions(logV, self.solution_.log_lambda, self.config_.bandwidth_ratio,
                         self.config_.buffer_cap)
        pts = np.concatenate([r["d1"][0], r["d2"][0], r["a1"][0]])
        return sorted(set(float(p) for p in pts[np.isfinite(pts)]))

    def _diagnostics(self):
        return {
            "lambda": self.solution_.lam,
            "log_lambda": self.solution_.log_lambda,
            "achieved_power": self.solution_.achieved_power,
        }
