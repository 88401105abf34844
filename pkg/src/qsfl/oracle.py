"""Verification engines independent of the closed forms.

Quadrature integrates the fitted policy itself over the Rayleigh gain,
one frame at a time. Monte Carlo draws block states and gains, applies the
batch policy and scores outages at full variance.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from sklearn.utils.validation import check_is_fitted

from .base import _OUTAGE_RTOL, in_outage
from .exceptions import ConfigError, QuadratureFailure

__all__ = ["McConfig", "McReport", "quadrature_distortion", "quadrature_power", "simulate",
           "thread_cap"]

# gains above this carry exp(-alpha) below the smallest subnormal
_LOG_ALPHA_MAX = math.log(750.0)
# integration starts this far (in log gain) below the first breakpoint
_LOG_MARGIN = 40.0
# mass e^u per segment must sit where quad can see it; below -40 it is under e^-40
_ANCHORS = (-40.0, -35.0, -30.0, -25.0, -20.0, -15.0, -10.0, -6.0, -3.0, -1.0, 0.0, 1.0, 2.0, 4.0)
_MIN_ACCEPT_TRIALS = 10**4


def thread_cap() -> int:
    """Worker count, capped by the QSFL_THREADS environment variable."""
    n = os.cpu_count() or 1
    env = os.environ.get("QSFL_THREADS")
    if env:
        try:
            n = min(n, max(1, int(env)))
        except ValueError:
            raise ConfigError(f"QSFL_THREADS must be an integer, got {env!r}") from None
    return n


def _integrate_frame(integrand, head, log_breaks, abs_tol, limit):
    """Sum of ``quad`` over log-gain segments split at the breakpoints, plus the head below them."""
    finite = [u for u in log_breaks if math.isfinite(u) and u < _LOG_ALPHA_MAX]
    lo = min(finite + [0.0]) - _LOG_MARGIN
    knots = sorted(set([lo, _LOG_ALPHA_MAX] + finite + [a for a in _ANCHORS if a > lo]))
    total = head(lo)
    for a, b in zip(knots[:-1], knots[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            val, err, info = quad(integrand, a, b, epsabs=abs_tol, epsrel=abs_tol, limit=limit,
                                  full_output=1)[:3]
        if info["last"] >= limit:
            raise QuadratureFailure(
                f"quadrature on log-gain [{a:g}, {b:g}] hit {limit} subdivisions (error {err:g})")
        total += val
    return total


def _mass_below(u):
    """Pr(alpha < e^u) for unit-mean exponential gain."""
    return -math.expm1(-math.exp(u))


def _frame_integral(est, make_pair, abs_tol, limit):
    check_is_fitted(est)
    frames = est.frames_
    acc = []
    for v in frames.variances:
        vt = tuple(float(x) for x in v)
        integrand, head = make_pair(vt)
        acc.append(_integrate_frame(integrand, head, est._breakpoints(vt), abs_tol, limit))
    return frames.expect(acc)


def quadrature_distortion(est, abs_tol: float = 1e-10, limit: int = 10**4) -> float:
    """E[D] of a fitted scheme by adaptive quadrature over the gain, per frame.

    Integrates in u = log(alpha). Realized distortion counts outage (rate
    above capacity) at full variance.
    """
    K = est.config_.frame_blocks

    def make_pair(v):
        full = math.fsum(v) / K

        def dist(u):
            rates, R, snr = est._policy_log(v, u)
            if R > math.log2(1.0 + snr) + _OUTAGE_RTOL * max(1.0, R):
                return full
            return math.fsum(x * 2.0 ** -r for x, r in zip(v, rates)) / K

        return (lambda u: dist(u) * math.exp(u - math.exp(u)),
                lambda u: dist(u) * _mass_below(u))

    return _frame_integral(est, make_pair, abs_tol, limit)


def quadrature_power(est, abs_tol: float = 1e-10, limit: int = 10**4) -> float:
    """E[gamma] of a fitted scheme by adaptive quadrature over log(alpha)."""

    def make_pair(v):
        snr = lambda u: est._policy_log(v, u)[2]
        # gamma e^-alpha d alpha = (alpha gamma) e^-alpha du
        integrand = lambda u: snr(u) * math.exp(-math.exp(u))
        # below the first breakpoint gamma is 0 or constant, so alpha * gamma ~ its integral
        return integrand, lambda u: snr(u)

    return _frame_integral(est, make_pair, abs_tol, limit)


@dataclass(frozen=True)
class McConfig:
    trials: int = 10**6
    seed: int = 0
    batch: int = 2**16

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError(f"trials must be a positive integer, got {self.trials}")
        if int(self.batch) != self.batch or self.batch < 1:
            raise ConfigError(f"batch must be a positive integer, got {self.batch}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must fit in 64 unsigned bits, got {self.seed}")

    @property
    def acceptance_grade(self) -> bool:
        return self.trials >= _MIN_ACCEPT_TRIALS


@dataclass(frozen=True)
class McReport:
    mean_distortion: float
    std_error: float
    mean_power: float
    power_std_error: float
    outage_rate: float
    trials: int

    def to_dict(self) -> dict:
        return asdict(self)


def _batch_stream(seed: int, index: int) -> np.random.Generator:
    # one counter-based stream per (seed, batch index), independent of scheduling
    return np.random.Generator(np.random.Philox(key=np.array([seed, index], dtype=np.uint64)))


def _run_batch(est, index, n, seed, cum_pmf, variances):
    K = est.config_.frame_blocks
    rng = _batch_stream(seed, index)
    u_state = rng.random((n, K))
    u_gain = rng.random(n)
    states = np.minimum(np.searchsorted(cum_pmf, u_state, side="right"), len(variances) - 1)
    V = -np.sort(-variances[states], axis=1)
    alpha = -np.log1p(-u_gain)
    rates, R, power = est._policy_batch(V, alpha)
    dist = est._realized_distortion(V, alpha, rates, R, power)
    out = in_outage(R, alpha, power)
    return _moments(dist), _moments(power), int(out.sum())


def _moments(x):
    mean = float(np.mean(x))
    return x.size, mean, float(np.sum((x - mean) ** 2))


def _merge(a, b):
    """Chan et al. pairwise combination of (count, mean, M2)."""
    na, ma, sa = a
    nb, mb, sb = b
    n = na + nb
    delta = mb - ma
    return n, ma + delta * nb / n, sa + sb + delta * delta * na * nb / n


def simulate(est, mc: McConfig = McConfig(), workers: int = None) -> McReport:
    """Monte Carlo E[D], mean power and outage rate of a fitted scheme.

    Bit-reproducible for a given (seed, trials, batch) regardless of ``workers``.
    """
    check_is_fitted(est)
    src = est.source_
    variances = np.asarray(src.variances, dtype=float)
    cum_pmf = np.cumsum(src.pmf)
    sizes = [mc.batch] * (mc.trials // mc.batch)
    if mc.trials % mc.batch:
        sizes.append(mc.trials % mc.batch)
    workers = thread_cap() if workers is None else max(1, int(workers))
    job = lambda item: _run_batch(est, item[0], item[1], mc.seed, cum_pmf, variances)
    if workers == 1 or len(sizes) == 1:
        parts = [job(item) for item in enumerate(sizes)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, enumerate(sizes)))
    dist, power = parts[0][0], parts[0][1]
    outages = parts[0][2]
    for d, p, o in parts[1:]:
        dist = _merge(dist, d)
        power = _merge(power, p)
        outages += o
    n = dist[0]

    def se(m):
        return math.sqrt(m[2] / (n - 1) / n) if n > 1 else math.inf

    return McReport(dist[1], se(dist), power[1], se(power), outages / n, n)
