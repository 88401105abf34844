import math
import os

import numpy as np
import pytest

from qsfl.exceptions import ConfigError
from qsfl.model import SystemConfig, make_source_d
from qsfl.oracle import McConfig, _merge, _moments, quadrature_distortion, quadrature_power, simulate, thread_cap
from qsfl.schemes import make_scheme


def test_mc_config_validation():
    for kw in (dict(trials=0), dict(batch=0), dict(seed=-1), dict(trials=2.5)):
        with pytest.raises(ConfigError):
            McConfig(**kw)
    assert not McConfig(trials=9999).acceptance_grade
    assert McConfig(trials=10**4).acceptance_grade


def test_merge_matches_pooled():
    rng = np.random.default_rng(0)
    parts = [rng.normal(size=n) for n in (5, 17, 1, 300)]
    acc = _moments(parts[0])
    for p in parts[1:]:
        acc = _merge(acc, _moments(p))
    allx = np.concatenate(parts)
    assert acc[0] == allx.size
    assert acc[1] == pytest.approx(allx.mean(), rel=1e-14)
    assert acc[2] / (acc[0] - 1) == pytest.approx(allx.var(ddof=1), rel=1e-12)


def test_simulate_is_worker_independent(source_u):
    est = make_scheme("SCORPA", SystemConfig(2, 1.0, 4.0, 100.0)).fit(source_u)
    mc = McConfig(trials=50_000, seed=9, batch=4096)
    a = simulate(est, mc, workers=1)
    b = simulate(est, mc, workers=4)
    assert a == b
    assert simulate(est, McConfig(trials=50_000, seed=10, batch=4096)) != a


def test_simulate_source_d_closed_form():
    # single state, K = 1, CRCP: outage probability is 1 - exp(-t) exactly
    est = make_scheme("CRCP", SystemConfig(1, 1.0, math.inf, 10.0)).fit(make_source_d())
    rep = simulate(est, McConfig(trials=200_000, seed=3))
    assert abs(rep.outage_rate - est.solution_.outage_probability) < 4 * math.sqrt(
        est.solution_.outage_probability / 200_000)
    assert rep.power_std_error == 0.0 and rep.mean_power == pytest.approx(10.0)


@pytest.mark.parametrize("name", ["SCORPA", "COPACR", "SCORACP", "CRCP"])
def test_quadrature_extreme_buffer(source_u, name):
    # at 60 dB with B_max = 4 the multiplier underflows; log-gain quadrature must still agree
    est = make_scheme(name, SystemConfig(2, 1.0, 4.0, 1e6)).fit(source_u)
    assert quadrature_distortion(est) == pytest.approx(est.mean_distortion_, rel=1e-6)
    if name in ("SCORPA", "COPACR"):
        assert quadrature_power(est) == pytest.approx(1e6, rel=1e-6)


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("QSFL_THREADS", "3")
    assert thread_cap() == min(3, os.cpu_count() or 1)
    monkeypatch.setenv("QSFL_THREADS", "zero")
    with pytest.raises(ConfigError):
        thread_cap()
