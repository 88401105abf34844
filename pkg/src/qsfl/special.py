"""Generalized exponential integral and incomplete gamma functions.

Real arguments only. Each function switches between a power series
(small argument) and a modified-Lentz continued fraction (large argument).

    E_p(x)      = int_1^inf exp(-x a) a^-p da
    Gamma(t, x) = int_x^inf a^(t-1) exp(-a) da
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .exceptions import DomainError, NonConvergence

__all__ = [
    "EULER_GAMMA",
    "SpecialFnConfig",
    "exp_int",
    "exp_int1_small",
    "ein",
    "exp_int1_log",
    "upper_gamma",
    "lower_gamma_scaled",
]

EULER_GAMMA = 0.5772156649015329
_TINY = 1e-300
# orders closer than this to an integer use the integer-order series
_INT_SNAP = 1e-9


@dataclass(frozen=True)
class SpecialFnConfig:
    rel_tol: float = 1e-14
    max_iter: int = 500

    def __post_init__(self):
        if not (0.0 < self.rel_tol <= 1e-6):
            raise ValueError(f"rel_tol must lie in (0, 1e-6], got {self.rel_tol}")
        if self.max_iter < 50:
            raise ValueError(f"max_iter must be >= 50, got {self.max_iter}")


DEFAULT = SpecialFnConfig()


def _lower_series(t, x, cfg):
    """sum_k x^k / (t (t+1) ... (t+k)); gamma(t, x) = x^t e^-x times this."""
    term = 1.0 / t
    total = term
    ap = t
    for _ in range(cfg.max_iter):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * cfg.rel_tol:
            return total
    raise NonConvergence(f"lower gamma series did not converge (t={t}, x={x})")


def _upper_cf(t, x, cfg):
    """Continued fraction for e^x x^-t Gamma(t, x), valid for x > t - 1."""
    b = x + 1.0 - t
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, cfg.max_iter + 1):
        an = -i * (i - t)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < cfg.rel_tol:
            return h
    raise NonConvergence(f"upper gamma continued fraction did not converge (t={t}, x={x})")


def upper_gamma(t: float, x: float, cfg: SpecialFnConfig = DEFAULT) -> float:
    """Upper incomplete gamma function Gamma(t, x) for t > 0, x >= 0."""
    if not t > 0.0:
        raise DomainError(f"upper_gamma requires t > 0, got t={t}")
    if not x >= 0.0:
        raise DomainError(f"upper_gamma requires x >= 0, got x={x}")
    if x == 0.0:
        return math.gamma(t)
    if math.isinf(x):
        return 0.0
    if x < t + 1.0:
        return math.gamma(t) - math.exp(t * math.log(x) - x) * _lower_series(t, x, cfg)
    return math.exp(t * math.log(x) - x) * _upper_cf(t, x, cfg)


def lower_gamma_scaled(t: float, x: float, cfg: SpecialFnConfig = DEFAULT) -> float:
    """Lower incomplete gamma divided by x^t, i.e. gamma(t, x) / x^t.

    Bounded on [0, inf) (equals 1/t at x = 0), so differences of lower
    gammas at tiny arguments can be formed without cancellation.
    """
    if not t > 0.0:
        raise DomainError(f"lower_gamma_scaled requires t > 0, got t={t}")
    if not x >= 0.0:
        raise DomainError(f"lower_gamma_scaled requires x >= 0, got x={x}")
    if x == 0.0:
        return 1.0 / t
    if math.isinf(x):
        return 0.0
    if x < t + 1.0:
        return math.exp(-x) * _lower_series(t, x, cfg)
    return (math.gamma(t) - upper_gamma(t, x, cfg)) * math.exp(-t * math.log(x))


def ein(x: float, cfg: SpecialFnConfig = DEFAULT) -> float:
    """Entire exponential integral Ein(x) = E_1(x) + gamma_E + ln(x)."""
    if x == 0.0:
        return 0.0
    if x > 2.0:
        return exp_int(1.0, x, cfg=cfg) + EULER_GAMMA + math.log(x)
    term = 1.0
    total = 0.0
    for k in range(1, cfg.max_iter + 1):
        term *= -x / k
        piece = -term / k
        total += piece
        if abs(piece) <= abs(total) * cfg.rel_tol:
            return total
    raise NonConvergence(f"Ein series did not converge (x={x})")


def _expint_cf(p, x, cfg):
    """Continued fraction for e^x E_p(x); x > 1."""
    b = x + p
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, cfg.max_iter + 1):
        an = -i * (p - 1.0 + i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < cfg.rel_tol:
            return h
    raise NonConvergence(f"E_p continued fraction did not converge (p={p}, x={x})")


def _expint_series_int(n, x, cfg):
    """Integer-order series for E_n(x); 0 < x <= 1."""
    nm1 = n - 1
    total = 1.0 / nm1 if nm1 != 0 else -math.log(x) - EULER_GAMMA
    fact = 1.0
    for i in range(1, cfg.max_iter + 1):
        fact *= -x / i
        if i != nm1:
            delta = -fact / (i - nm1)
        else:
            psi = -EULER_GAMMA + sum(1.0 / k for k in range(1, nm1 + 1))
            delta = fact * (-math.log(x) + psi)
        total += delta
        if abs(delta) < abs(total) * cfg.rel_tol:
            return total
    raise NonConvergence(f"E_n series did not converge (n={n}, x={x})")


def exp_int(p: float, x: float, scaled: bool = False, cfg: SpecialFnConfig = DEFAULT) -> float:
    """Generalized exponential integral E_p(x) for real p >= 1, x >= 0.

    With ``scaled=True`` returns exp(x) * E_p(x), which stays finite for
    large x.
    """
    if not p >= 1.0:
        raise DomainError(f"exp_int requires p >= 1, got p={p}")
    if not x >= 0.0:
        raise DomainError(f"exp_int requires x >= 0, got x={x}")
    if x == 0.0:
        if p == 1.0:
            raise DomainError("E_1(0) diverges")
        return 1.0 / (p - 1.0)
    if math.isinf(x):
        return 0.0
    if x > 1.0:
        h = _expint_cf(p, x, cfg)
        return h if scaled else h * math.exp(-x)

    n = round(p)
    if abs(p - n) < _INT_SNAP:
        val = _expint_series_int(int(n), x, cfg)
    else:
        # E_f from the incomplete gamma, then upward recurrence (stable for x <= 1)
        whole = math.floor(p)
        f = p - whole
        val = math.exp((f - 1.0) * math.log(x)) * upper_gamma(1.0 - f, x, cfg)
        q = f
        ex = math.exp(-x)
        for _ in range(int(whole)):
            val = (ex - x * val) / q
            q += 1.0
    return val * math.exp(x) if scaled else val


def exp_int1_log(log_x: float) -> float:
    """E_1(exp(log_x)); stays finite when exp(log_x) underflows."""
    if log_x == math.inf:
        return 0.0
    x = math.exp(log_x)
    if x <= 2.0:
        return -EULER_GAMMA - log_x + ein(x)
    return exp_int(1.0, x)


def exp_int1_small(x: float) -> float:
    """Small-argument approximation E_1(x) ~ -gamma_E - ln(x), for 0 < x <= 0.01.

    For asymptotic analysis only; exact evaluators use :func:`exp_int`.
    """
    if not (0.0 < x <= 0.01):
        raise DomainError(f"exp_int1_small is only valid on (0, 0.01], got x={x}")
    return -EULER_GAMMA - math.log(x)
