import math

import mpmath
import numpy as np
import pytest

from conftest import SMOKE_GRID
from qsfl.copacr import (
    Copacr,
    _log_threshold,
    mean_distortion_given_rate,
    optimize_rate,
    outage_threshold,
    rate_search_limit,
    solve_threshold,
)
from qsfl.crcp import Crcp
from qsfl.exceptions import DomainError, RateOverBuffer
from qsfl.model import SystemConfig
from qsfl.oracle import quadrature_power
from qsfl.special import exp_int, exp_int1_log


def test_threshold_worked_example():
    q = solve_threshold(1.0, 10.0)
    t = 1.0 / q
    assert t == pytest.approx(2.55e-5, rel=0.01)
    assert q == pytest.approx(3.92e4, rel=0.01)
    # independent check of E_1(t) = 10
    assert float(mpmath.e1(t)) == pytest.approx(10.0, rel=1e-12)


@pytest.mark.parametrize("R,p", [(0.01, 1.0), (1.0, 10.0), (3.0, 1e3), (10.0, 1e6), (0.5, 1e-3)])
def test_threshold_condition(R, p):
    # log form: t itself underflows at the largest rate
    lt = _log_threshold(R, p)
    assert math.expm1(R * math.log(2.0)) * exp_int1_log(lt) == pytest.approx(p, rel=1e-9)
    if lt > -700.0:
        assert outage_threshold(R, p) == pytest.approx(math.exp(lt), rel=1e-15)


def test_threshold_decreases_with_power():
    ts = [outage_threshold(2.0, p) for p in (1.0, 10.0, 100.0, 1e4)]
    assert all(a > b for a, b in zip(ts, ts[1:]))


def test_threshold_domain():
    with pytest.raises(DomainError):
        solve_threshold(0.0, 1.0)
    with pytest.raises(DomainError):
        solve_threshold(1.0, -1.0)
    assert outage_threshold(0.0, 5.0) == 0.0


def test_zero_rate_and_large_rate(source_u):
    cfg = SystemConfig(2, 1.0, math.inf, 100.0)
    assert mean_distortion_given_rate(0.0, source_u, cfg) == pytest.approx(source_u.mean_variance)
    assert mean_distortion_given_rate(60.0, source_u, cfg) == pytest.approx(source_u.mean_variance, rel=1e-6)


def test_rate_over_buffer(source_u):
    with pytest.raises(RateOverBuffer):
        mean_distortion_given_rate(3.0, source_u, SystemConfig(2, 2.0, 4.0, 10.0))


def test_optimum_beats_grid(source_u):
    cfg = SystemConfig(2, 1.0, math.inf, 1e3)
    sol = optimize_rate(source_u, cfg)
    grid = np.linspace(0.0, rate_search_limit(cfg), 64)
    assert all(sol.mean_distortion <= mean_distortion_given_rate(R, source_u, cfg) + 1e-12 for R in grid)
    assert sol.unimodal


def test_rate_pinned_to_buffer_at_high_power(source_u):
    sol = optimize_rate(source_u, SystemConfig(2, 2.0, 4.0, 1e7))
    assert sol.rate_star == pytest.approx(2.0, abs=1e-5)


def test_truncated_inversion_policy(source_u):
    est = Copacr(2, 1.0, math.inf, 20.0).fit(source_u)
    R, t = est.rate_star_, est.outage_alpha_
    above = est.decide([9.0, 4.0], 2.0 * t)
    assert 2.0 * t * above.power == pytest.approx(2.0 ** R - 1.0, rel=1e-12)
    assert est.decide([9.0, 4.0], 0.5 * t).power == 0.0


def test_power_budget_by_quadrature(source_u):
    est = Copacr(2, 2.0, math.inf, 30.0).fit(source_u)
    assert quadrature_power(est) == pytest.approx(est.config_.power_budget, rel=1e-6)


@pytest.mark.parametrize("K,b,B,p", SMOKE_GRID)
def test_dominates_crcp(source_u, K, b, B, p):
    cop = Copacr(K, b, B, p).fit(source_u).mean_distortion_
    crc = Crcp(K, b, B, p).fit(source_u).mean_distortion_
    assert crc >= cop - 1e-12
