import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special as sps

from qsfl.exceptions import DomainError, NonConvergence
from qsfl.special import (
    EULER_GAMMA,
    SpecialFnConfig,
    ein,
    exp_int,
    exp_int1_log,
    exp_int1_small,
    lower_gamma_scaled,
    upper_gamma,
)

orders = st.floats(min_value=1.0, max_value=40.0, allow_nan=False)
args = st.floats(min_value=1e-8, max_value=60.0, allow_nan=False)


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


@pytest.mark.parametrize("n,x", [(1, 1e-6), (1, 0.3), (1, 1.0), (2, 0.5), (3, 2.0), (5, 10.0), (8, 0.01), (1, 40.0)])
def test_exp_int_integer_matches_scipy(n, x):
    assert rel(exp_int(n, x), sps.expn(n, x)) < 1e-12


@pytest.mark.parametrize("p,x", [(1.5, 0.2), (2.25, 1e-3), (4.0 / 3.0, 3.0), (6.5, 0.9), (9.0 / 7.0, 1e-6), (17.3, 5.0)])
def test_exp_int_real_order_matches_mpmath(p, x):
    assert rel(exp_int(p, x), float(mpmath.expint(p, x))) < 1e-11


def test_exp_int_scaled_large_argument():
    x = 800.0
    ref = float(mpmath.expint(2.5, x) * mpmath.exp(x))
    assert rel(exp_int(2.5, x, scaled=True), ref) < 1e-12


def test_exp_int_at_zero():
    assert exp_int(3.0, 0.0) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        exp_int(1.0, 0.0)


@pytest.mark.parametrize("bad", [(0.5, 1.0), (1.0, -1.0)])
def test_exp_int_domain(bad):
    with pytest.raises(DomainError):
        exp_int(*bad)


@settings(max_examples=300, deadline=None)
@given(p=orders, x=args)
def test_exp_int_recurrence(p, x):
    # p E_{p+1}(x) + x E_p(x) = e^-x
    lhs = p * exp_int(p + 1.0, x, scaled=True) + x * exp_int(p, x, scaled=True)
    assert abs(lhs - 1.0) < 1e-10


@settings(max_examples=200, deadline=None)
@given(p=orders, x=args)
def test_exp_int_decreasing_in_order(p, x):
    assert exp_int(p + 0.5, x) <= exp_int(p, x) * (1.0 + 1e-12)


@pytest.mark.parametrize("t,x", [(0.5, 0.1), (1.0, 2.0), (2.5, 7.0), (0.2, 30.0), (5.0, 1.0), (1.0 / 3.0, 1e-5)])
def test_upper_gamma_matches_scipy(t, x):
    ref = sps.gammaincc(t, x) * sps.gamma(t)
    assert rel(upper_gamma(t, x), ref) < 1e-11


@settings(max_examples=300, deadline=None)
@given(t=st.floats(min_value=0.05, max_value=30.0), x=st.floats(min_value=1e-6, max_value=50.0))
def test_upper_gamma_recurrence(t, x):
    # Gamma(t+1, x) = t Gamma(t, x) + x^t e^-x
    lhs = upper_gamma(t + 1.0, x)
    rhs = t * upper_gamma(t, x) + math.exp(t * math.log(x) - x)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


@settings(max_examples=200, deadline=None)
@given(t=st.floats(min_value=0.05, max_value=20.0), x=st.floats(min_value=0.0, max_value=40.0))
def test_lower_scaled_consistent(t, x):
    if x == 0.0:
        assert lower_gamma_scaled(t, x) == pytest.approx(1.0 / t)
        return
    with mpmath.workdps(40):
        ref = float(mpmath.gammainc(t, 0, x) / mpmath.mpf(x) ** t)
    assert rel(lower_gamma_scaled(t, x), ref) < 1e-10


def test_lower_scaled_tiny_argument_has_no_cancellation():
    assert lower_gamma_scaled(0.5, 1e-300) == pytest.approx(2.0, rel=1e-14)


@pytest.mark.parametrize("x", [0.0, 1e-320, 1e-12, 0.5, 2.0, 3.0, 25.0])
def test_ein_definition(x):
    with mpmath.workdps(60):
        ref = float(mpmath.e1(x) + mpmath.euler + mpmath.log(x)) if x > 0.0 else 0.0
    assert abs(ein(x) - ref) <= 1e-13 * max(1.0, abs(ref))


@pytest.mark.parametrize("lx", [-5000.0, -700.0, -30.0, -1.0, 0.0, 0.6, 2.0, 6.0])
def test_exp_int1_log(lx):
    ref = float(mpmath.e1(mpmath.exp(lx)))
    assert rel(exp_int1_log(lx), ref) < 1e-12


def test_exp_int1_log_limits():
    assert exp_int1_log(math.inf) == 0.0
    assert exp_int1_log(-1e6) == pytest.approx(-EULER_GAMMA + 1e6, rel=1e-15)


def test_small_argument_approximation():
    x = 1e-3
    assert abs(exp_int1_small(x) - exp_int(1.0, x)) < 2 * x
    with pytest.raises(DomainError):
        exp_int1_small(0.5)


def test_config_validation_and_nonconvergence():
    with pytest.raises(ValueError):
        SpecialFnConfig(rel_tol=0.1)
    with pytest.raises(ValueError):
        SpecialFnConfig(max_iter=5)
    starved = SpecialFnConfig(rel_tol=1e-15, max_iter=50)
    with pytest.raises(NonConvergence):
        upper_gamma(30.0, 29.0, starved)
