import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsfl.exceptions import EmptyFrame
from qsfl.waterfill import allocate, waterfill_distortion, waterfill_rates


def brute_force(v, total, rng, trials=4000):
    """Best distortion among random simplex points plus every active-set KKT candidate."""
    K = len(v)
    best = math.inf
    # every nonempty active set, rates from the equal-level condition, projected to >= 0
    for mask in range(1, 2 ** K):
        act = [j for j in range(K) if mask >> j & 1]
        level = (sum(math.log2(v[j]) for j in act) - total) / len(act)
        r = np.zeros(K)
        for j in act:
            r[j] = math.log2(v[j]) - level
        if np.all(r >= -1e-12):
            r = np.maximum(r, 0.0)
            best = min(best, float(np.sum(v * 2.0 ** -r)))
    w = rng.dirichlet(np.ones(K), size=trials) * total
    best = min(best, float(np.min((v[None, :] * 2.0 ** -w).sum(axis=1))))
    return best


def test_bruteforce_minimality_1000_cases():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        K = int(rng.integers(1, 5))
        v = np.sort(rng.uniform(0.05, 80.0, K))[::-1]
        total = float(rng.uniform(0.0, 12.0))
        d = waterfill_distortion(v[None, :], total)[0]
        assert d <= brute_force(v, total, rng, trials=200) * (1.0 + 1e-10)
        a = allocate(v, total)
        assert a.total == pytest.approx(total, abs=1e-9)
        assert min(a.rates) >= 0.0


def test_scalar_and_batch_agree():
    rng = np.random.default_rng(7)
    V = -np.sort(-rng.uniform(0.1, 50.0, (200, 4)), axis=1)
    T = rng.uniform(0.0, 20.0, 200)
    R = waterfill_rates(V, T)
    for i in range(200):
        assert np.allclose(allocate(V[i], T[i]).rates, R[i], atol=1e-12)


def test_worked_example():
    # 2 bits over (16, 1): level 4, rates (2, 0), distortion 4 + 1
    a = allocate((16.0, 1.0), 2.0)
    assert a.rates == pytest.approx((2.0, 0.0))
    assert a.active_blocks == 1
    assert waterfill_distortion([[16.0, 1.0]], 2.0)[0] == pytest.approx(5.0)


def test_zero_rate_and_errors():
    a = allocate((3.0, 2.0), 0.0)
    assert a.rates == (0.0, 0.0) and a.active_blocks == 0
    with pytest.raises(EmptyFrame):
        allocate((), 1.0)
    with pytest.raises(ValueError):
        allocate((1.0, 2.0), 1.0)
    with pytest.raises(ValueError):
        allocate((2.0, 1.0), -1.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.01, 100.0), min_size=1, max_size=6), st.floats(0.0, 30.0), st.floats(0.0, 5.0))
def test_distortion_monotone_in_rate(vs, total, extra):
    v = np.sort(np.array(vs))[::-1][None, :]
    assert waterfill_distortion(v, total + extra)[0] <= waterfill_distortion(v, total)[0] * (1 + 1e-12)
