"""Estimator base class and input validation shared by the four schemes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ConfigError
from .model import (
    PolicyDecision,
    SourceModel,
    SystemConfig,
    db_to_linear,
    frame_table,
    source_by_name,
)

__all__ = [
    "SchemeEstimator",
    "SchemeReport",
    "check_source",
    "check_frame_gain",
    "capacity",
    "in_outage",
]

_OUTAGE_RTOL = 1e-9


def capacity(alpha, power):
    """log2(1 + alpha * power), bits per channel use."""
    return np.log2(1.0 + np.asarray(alpha, dtype=float) * np.asarray(power, dtype=float))


def in_outage(channel_rate, alpha, power):
    """True where the channel rate exceeds instantaneous capacity (beyond rounding)."""
    R = np.asarray(channel_rate, dtype=float)
    return R > capacity(alpha, power) + _OUTAGE_RTOL * np.maximum(1.0, R)


def check_source(X) -> SourceModel:
    """Coerce a source description into a :class:`SourceModel`.

    Accepts a SourceModel, a name ("U", "G", "D"), a mapping with
    ``variances`` and ``pmf``, or an array of shape (N_s, 2) whose columns
    are (variance, probability).
    """
    if isinstance(X, SourceModel):
        return X
    if isinstance(X, str):
        return source_by_name(X)
    if isinstance(X, dict):
        try:
            return SourceModel(tuple(X["variances"]), tuple(X["pmf"]))
        except KeyError as exc:
            raise ConfigError(f"source mapping needs {exc.args[0]!r}") from None
    arr = check_array(X, ensure_min_samples=1)
    if arr.shape[1] != 2:
        raise ConfigError(f"source array must have 2 columns (variance, pmf), got {arr.shape[1]}")
    return SourceModel(tuple(arr[:, 0]), tuple(arr[:, 1]))


def check_frame_gain(X, K: int):
    """Validate rows of (v_1, ..., v_K, alpha).

    Returns the descending-sorted variances (n, K), the column order used
    for sorting (n, K) and the gains (n,).
    """
    arr = check_array(X, ensure_min_samples=1)
    if arr.shape[1] != K + 1:
        raise ValueError(f"expected {K + 1} columns (K variances then gain), got {arr.shape[1]}")
    V = arr[:, :K]
    alpha = arr[:, K]
    if np.any(V <= 0.0):
        raise ValueError("block variances must be positive")
    if np.any(alpha < 0.0):
        raise ValueError("channel gains must be nonnegative")
    order = np.argsort(-V, axis=1, kind="stable")
    return np.take_along_axis(V, order, axis=1), order, alpha


@dataclass
class SchemeReport:
    scheme: str
    mean_distortion: float
    rsnr_db: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "E_D": self.mean_distortion,
            "RSNR_dB": self.rsnr_db,
            "diagnostics": dict(self.diagnostics),
        }


class SchemeEstimator(BaseEstimator):
    """Common fit/transform/predict surface.

    ``fit`` takes a source description and solves the scheme's optimization
    for the configured (K, b, B_max, power). ``transform`` maps rows of
    (block variances..., gain) to (source rates..., channel rate, power);
    ``predict`` maps them to the realized per-sample distortion.

    Subclasses implement ``_solve``, ``_closed_form``, ``_policy_log``,
    ``_policy_batch`` and ``_breakpoints``. ``_policy_log`` takes log(alpha)
    and returns the received SNR alpha * gamma instead of the power, so the
    policy stays finite for gains far below the smallest double.
    """

    scheme_name = ""
    no_outage = False

    def __init__(self, frame_blocks=2, bandwidth_ratio=1.0, buffer_cap=math.inf, power_db=30.0):
        self.frame_blocks = frame_blocks
        self.bandwidth_ratio = bandwidth_ratio
        self.buffer_cap = buffer_cap
        self.power_db = power_db

    def _make_config(self) -> SystemConfig:
        return SystemConfig(
            frame_blocks=self.frame_blocks,
            bandwidth_ratio=float(self.bandwidth_ratio),
            buffer_cap=float(self.buffer_cap),
            power_budget=db_to_linear(float(self.power_db)),
        )

    @classmethod
    def from_config(cls, cfg: SystemConfig):
        return cls(frame_blocks=cfg.frame_blocks, bandwidth_ratio=cfg.bandwidth_ratio,
                   buffer_cap=cfg.buffer_cap, power_db=cfg.power_db)

    def fit(self, X, y=None):
        self.source_ = check_source(X)
        self.config_ = self._make_config()
        self.frames_ = frame_table(self.source_, self.config_.frame_blocks)
        self.n_features_in_ = self.config_.frame_blocks + 1
        self._solve()
        self.mean_distortion_ = float(self._closed_form())
        self.rsnr_db_ = 10.0 * math.log10(self.source_.mean_variance / self.mean_distortion_)
        return self

    def decide(self, variances, alpha: float) -> PolicyDecision:
        """Decision for one frame; ``source_rates`` follow the given block order."""
        check_is_fitted(self)
        v = np.asarray(variances, dtype=float)
        if v.shape != (self.config_.frame_blocks,):
            raise ValueError(f"expected {self.config_.frame_blocks} variances")
        order = np.argsort(-v, kind="stable")
        dec = self._policy_scalar(tuple(v[order]), float(alpha))
        rates = np.empty_like(v)
        rates[order] = dec.source_rates
        return PolicyDecision(tuple(rates.tolist()), dec.channel_rate, dec.power)

    def transform(self, X):
        check_is_fitted(self)
        V, order, alpha = check_frame_gain(X, self.config_.frame_blocks)
        rates_sorted, R, power = self._policy_batch(V, alpha)
        rates = np.empty_like(rates_sorted)
        np.put_along_axis(rates, order, rates_sorted, axis=1)
        return np.column_stack([rates, R, power])

    def predict(self, X):
        """Realized distortion per row, full block variance on outage."""
        check_is_fitted(self)
        V, _, alpha = check_frame_gain(X, self.config_.frame_blocks)
        rates, R, power = self._policy_batch(V, alpha)
        return self._realized_distortion(V, alpha, rates, R, power)

    def _policy_log(self, v_sorted, log_alpha):
        """(rates, channel rate, alpha * gamma) for descending ``v_sorted``."""
        raise NotImplementedError

    def _policy_scalar(self, v_sorted, alpha) -> PolicyDecision:
        log_alpha = math.log(alpha) if alpha > 0.0 else -math.inf
        rates, R, snr = self._policy_log(v_sorted, log_alpha)
        return PolicyDecision(tuple(rates), R, snr / alpha if snr > 0.0 else 0.0)

    def _realized_distortion(self, V, alpha, rates, R, power):
        K = V.shape[1]
        ok = (V * np.exp2(-rates)).sum(axis=1) / K
        full = V.sum(axis=1) / K
        return np.where(in_outage(R, alpha, power), full, ok)

    def report(self) -> SchemeReport:
        check_is_fitted(self)
        return SchemeReport(self.scheme_name, self.mean_distortion_, self.rsnr_db_,
                            self._diagnostics())

    def _diagnostics(self) -> dict:
        return {}

    def _breakpoints(self, v_sorted):
        """log(alpha) values where the policy for this frame changes form."""
        return []
