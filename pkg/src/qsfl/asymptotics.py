"""High-power behaviour: saturation floor, rate fits, exponents and power gains."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .exceptions import MissingFit, Unachievable
from .model import SourceModel, SystemConfig, frame_table
from .scoracp import asymptotic_constants
from .schemes import make_scheme
from .waterfill import waterfill_distortion

__all__ = [
    "FitResult",
    "GainKind",
    "GainReport",
    "saturation_distortion",
    "fit_multiplexing_gain",
    "default_fit_grid",
    "estimate_exponent",
    "power_gain_formula",
    "power_gain_empirical",
    "rsnr_db",
]

# default least-squares windows, 2 dB steps
FIT_WINDOWS_DB = {"COPACR": (30.0, 60.0), "CRCP": (40.0, 60.0)}
_MIN_FIT_POINTS = 8


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    residual: float
    fit_range_dB: tuple


class GainKind(enum.Enum):
    G1 = "SCORPA vs COPACR"
    G2 = "COPACR vs SCORACP"
    G3 = "CRCP vs SCORACP"


@dataclass(frozen=True)
class GainReport:
    which: GainKind
    gain_dB: float
    p2_dB: float
    simplified_dB: float = float("nan")


def saturation_distortion(source: SourceModel, K: int, b_max: float) -> float:
    """Distortion floor (1/K) E[n lam~ + sum_{j>n} v_j] with K*b_max bits per frame."""
    if not math.isfinite(b_max):
        raise ValueError("saturation distortion needs a finite buffer cap")
    frames = frame_table(source, K)
    return frames.expect(waterfill_distortion(frames.variances, K * b_max)) / K


def rsnr_db(source: SourceModel, distortion: float) -> float:
    return 10.0 * math.log10(source.mean_variance / distortion)


def default_fit_grid(scheme: str):
    lo, hi = FIT_WINDOWS_DB[scheme.upper()]
    return np.arange(lo, hi + 1e-9, 2.0)


def fit_multiplexing_gain(scheme: str, source: SourceModel, cfg: SystemConfig,
                          grid_dB=None) -> FitResult:
    """Least-squares line R*(P) = slope * log2(P) + intercept over ``grid_dB``."""
    scheme = scheme.upper()
    if scheme not in FIT_WINDOWS_DB:
        raise ValueError(f"rate fits exist only for COPACR and CRCP, got {scheme}")
    if not cfg.unbounded:
        raise ValueError("rate fits are defined for an unbounded buffer")
    grid = default_fit_grid(scheme) if grid_dB is None else np.asarray(grid_dB, dtype=float)
    if grid.size < _MIN_FIT_POINTS:
        raise ValueError(f"fit grid needs at least {_MIN_FIT_POINTS} points, got {grid.size}")
    x = grid / (10.0 * math.log10(2.0))
    y = np.array([make_scheme(scheme, cfg.with_power_db(p)).fit(source).rate_star_ for p in grid])
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return FitResult(float(slope), float(intercept), resid, (float(grid[0]), float(grid[-1])))


def estimate_exponent(scheme: str, source: SourceModel, cfg: SystemConfig,
                      probes_dB=(50.0, 60.0)) -> float:
    """-d ln E[D] / d ln P from exact E[D] at two probe powers."""
    pa, pb = probes_dB
    if not pb > pa:
        raise ValueError("probe powers must be increasing")
    da = make_scheme(scheme, cfg.with_power_db(pa)).fit(source).mean_distortion_
    db = make_scheme(scheme, cfg.with_power_db(pb)).fit(source).mean_distortion_
    return -(math.log(db) - math.log(da)) / ((pb - pa) / 10.0 * math.log(10.0))


def _geo_means(source, K, b):
    frames = frame_table(source, K)
    logp = np.log(frames.variances).sum(axis=1)
    return frames.expect(np.exp(logp / K)), frames.expect(np.exp(logp / (K + b * K)))


def power_gain_formula(which, source: SourceModel, cfg: SystemConfig, p2_dB: float,
                       copacr_fit: FitResult = None, crcp_fit: FitResult = None) -> GainReport:
    """Asymptotic power gain from the closed-form high-power laws.

    G1 and G2 need the COPACR fit (r1, r0); G3 needs the CRCP intercept.
    ``simplified_dB`` is the leading log-power term alone.
    """
    which = GainKind[which] if isinstance(which, str) else GainKind(which)
    K, b = cfg.frame_blocks, cfg.bandwidth_ratio
    p2 = 10.0 ** (p2_dB / 10.0)
    lp2 = 10.0 * math.log10(p2)
    e_geo, e_geo_ext = _geo_means(source, K, b)
    if which in (GainKind.G1, GainKind.G2) and copacr_fit is None:
        raise MissingFit(f"{which.name} needs the COPACR multiplexing-gain fit")
    if which is GainKind.G3 and crcp_fit is None:
        raise MissingFit("G3 needs the CRCP multiplexing-gain fit")

    if which is GainKind.G1:
        r1, r0 = copacr_fit.slope, copacr_fit.intercept
        num = e_geo * p2 ** (b * (1.0 - r1)) * 2.0 ** (-b * r0)
        den = (math.gamma(1.0 / (b + 1.0)) * e_geo_ext) ** (b + 1.0)
        return GainReport(which, 10.0 / b * math.log10(num / den), p2_dB, (1.0 - r1) * lp2)

    v_const, w_const = asymptotic_constants(source, cfg.with_power_db(p2_dB))
    const = w_const if b == 1.0 else v_const
    if which is GainKind.G2:
        r1, r0 = copacr_fit.slope, copacr_fit.intercept
        den = e_geo * p2 ** (1.0 - b * r1) * 2.0 ** (-b * r0)
        gain = 10.0 / (b * r1) * math.log10(const / den)
        return GainReport(which, gain, p2_dB, (b * r1 - 1.0) / (b * r1) * lp2)

    rt0 = crcp_fit.intercept
    den = 2.0 ** (-b * rt0) * e_geo + 2.0 ** rt0 * source.mean_variance
    gain = (b + 1.0) / b * 10.0 * math.log10(const * p2 ** (-1.0 / (b + 1.0)) / den)
    return GainReport(which, gain, p2_dB, -lp2 / b)


_GAIN_PAIRS = {GainKind.G1: ("SCORPA", "COPACR"), GainKind.G2: ("COPACR", "SCORACP"),
               GainKind.G3: ("CRCP", "SCORACP")}


def _power_for_rsnr(scheme, target, source, cfg, lo_dB, hi_dB):
    f = lambda p: make_scheme(scheme, cfg.with_power_db(p)).fit(source).rsnr_db_ - target
    f_hi = f(hi_dB)
    if f_hi < 0.0:
        raise Unachievable(f"{scheme} reaches only {f_hi + target:.4g} dB RSNR at {hi_dB:g} dB power")
    if f(lo_dB) >= 0.0:
        return lo_dB
    return brentq(f, lo_dB, hi_dB, xtol=1e-9)


def power_gain_empirical(scheme1: str, scheme2: str, target_rsnr: float, source: SourceModel,
                         cfg: SystemConfig, bracket_dB=(-20.0, 120.0)) -> GainReport:
    """Gain 10 log10 P2 - 10 log10 P1 at equal RSNR ``target_rsnr`` (dB).

    ``which`` is set when the pair is one of G1..G3 and None otherwise.
    """
    pair = (scheme1.upper(), scheme2.upper())
    which = next((k for k, v in _GAIN_PAIRS.items() if v == pair), None)
    lo, hi = bracket_dB
    p2 = _power_for_rsnr(scheme2, target_rsnr, source, cfg, lo, hi)
    if pair[0] == pair[1]:
        return GainReport(which, 0.0, p2)
    p1 = _power_for_rsnr(scheme1, target_rsnr, source, cfg, lo, hi)
    return GainReport(which, p2 - p1, p2)
