import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from voltclt.bernstein_lift import rl_measure
from voltclt.errors import ConfigurationError, DomainError
from voltclt.kernels import (
    ConstantLimit,
    ExpSum,
    FromMeasure,
    Gamma,
    LogModulated,
    PowerLimit,
    RiemannLiouville,
    Shifted,
    analyze_kernel,
    cross_integral,
    eval_kernel,
    fit_gamma_bar,
    kernel_from_dict,
    kernel_integral,
    kernel_sq_integral,
    kernel_to_dict,
    l2_norm_sq,
    lambda_n,
    limit_covariance,
    limit_kernel,
)

KERNELS = [
    RiemannLiouville(0.3),
    RiemannLiouville(0.1, gamma_normalized=False),
    Gamma(0.4, 1.5),
    ExpSum(0.2, ((1.0, 0.5), (0.7, 3.0))),
    Shifted(RiemannLiouville(0.2), 0.05),
]


@pytest.mark.parametrize("H", [0.05, 0.1, 0.25, 0.4, 0.5, 0.75])
@pytest.mark.parametrize("n", [1, 7, 1000])
def test_rl_lambda_closed_form(H, n):
    expected = 2 * H * special.gamma(H + 0.5) ** 2 * n ** (2 * H)
    assert lambda_n(RiemannLiouville(H), n) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("spec", KERNELS, ids=lambda k: k.family)
@pytest.mark.parametrize("t", [1e-3, 0.3, 1.0])
def test_closed_l2_matches_quadrature(spec, t):
    closed = l2_norm_sq(spec, t)
    quad = l2_norm_sq(spec, t, method="quadrature")
    assert closed == pytest.approx(quad, rel=1e-9)


@pytest.mark.parametrize("spec", KERNELS, ids=lambda k: k.family)
def test_kernel_integral_matches_mpmath(spec):
    # tanh-sinh quadrature handles the integrable endpoint singularity
    mpmath.mp.dps = 25
    f = lambda s: float(eval_kernel(spec, float(s)))
    ref = float(mpmath.quad(f, [0, 0.25, 1]))
    assert kernel_integral(spec, 0.0, 1.0) == pytest.approx(ref, rel=1e-6)


def test_gamma_without_damping_is_rl():
    for t in (0.01, 0.5, 2.0):
        assert l2_norm_sq(Gamma(0.3, 0.0), t) == pytest.approx(l2_norm_sq(RiemannLiouville(0.3), t), rel=1e-14)


def test_shifted_kernel_value():
    k = Shifted(RiemannLiouville(0.3), 0.1)
    assert float(k(0.4)) == pytest.approx(float(RiemannLiouville(0.3)(0.5)), rel=1e-15)


def test_cross_integral_reduces_to_l2():
    k = RiemannLiouville(0.3)
    assert cross_integral(k, 0.0, 0.7) == pytest.approx(l2_norm_sq(k, 0.7), rel=1e-9)


@pytest.mark.parametrize("spec", KERNELS + [FromMeasure(rl_measure(0.3))], ids=lambda k: k.family)
def test_limit_kernel_normalised(spec):
    an = analyze_kernel(spec)
    kbar = limit_kernel(spec, numeric=an.source != "closed-form")
    assert float(kbar.sq_integral(1.0)) == pytest.approx(1.0, rel=1e-9)


def test_limit_kernel_descriptors():
    assert limit_kernel(RiemannLiouville(0.3)) == PowerLimit(math.sqrt(0.6), -0.2)
    assert limit_kernel(ExpSum(1.0)) == ConstantLimit(1.0)
    numeric = limit_kernel(FromMeasure(rl_measure(0.3)))
    assert isinstance(numeric, PowerLimit)
    assert numeric.exponent == pytest.approx(-0.2, abs=1e-3)


def test_limit_covariance_oracle():
    # Sigma_01 for H=0.3 from an mpmath reference of integral_0^0.5 Kbar(0.5+s) Kbar(s) ds
    mpmath.mp.dps = 30
    ref = float(mpmath.quad(lambda s: 0.6 * (0.5 + s) ** -0.2 * s ** -0.2, [0, 0.5]))
    cov = limit_covariance(limit_kernel(RiemannLiouville(0.3)), 1.3, (0.5, 1.0))
    assert cov[0, 1] == pytest.approx(1.69 * ref, rel=1e-9)
    assert cov[0, 0] == pytest.approx(1.69 * 0.5**0.6, rel=1e-12)
    assert cov[1, 1] == pytest.approx(1.69, rel=1e-12)


def test_analyze_rl_orders():
    an = analyze_kernel(RiemannLiouville(0.3), 1.0, 0.5)
    assert (an.gamma, an.gamma_star, an.gamma_bar) == (0.3, 0.3, 0.3)
    assert an.eta_star == pytest.approx(0.2)
    assert an.q_interval == pytest.approx((0.3, 0.45))
    assert an.condition_i and an.fclt_ok


def test_analyze_log_modulated_gap():
    an = analyze_kernel(LogModulated(0.3), delta=0.01)
    assert an.gamma == pytest.approx(0.29)
    assert an.gamma_star == pytest.approx(0.3)
    assert not an.fclt_ok


def test_regression_orders_match_closed_form():
    an = analyze_kernel(RiemannLiouville(0.3), closed_form=False)
    assert an.gamma_star == pytest.approx(0.3, abs=1e-6)
    assert an.source == "regression"


def test_fit_gamma_bar_rl():
    assert fit_gamma_bar(RiemannLiouville(0.3)) == pytest.approx(0.3, abs=0.02)


@pytest.mark.parametrize("spec", KERNELS + [LogModulated(0.2, 0.5)], ids=lambda k: k.family)
def test_dict_round_trip(spec):
    assert kernel_from_dict(kernel_to_dict(spec)) == spec


@pytest.mark.parametrize(
    "d",
    [{"family": "nope"}, {"family": "riemann-liouville"}, {"family": "gamma", "H": 0.3, "bogus": 1}, {}],
)
def test_bad_descriptor(d):
    with pytest.raises(ConfigurationError):
        kernel_from_dict(d)


@pytest.mark.parametrize("H", [0.0, 1.0, -0.1])
def test_rl_rejects_h(H):
    with pytest.raises(ConfigurationError):
        RiemannLiouville(H)


def test_l2_needs_positive_time():
    with pytest.raises(DomainError):
        l2_norm_sq(RiemannLiouville(0.3), 0.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.02, 0.98), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_l2_additive(H, a, b):
    k = RiemannLiouville(H)
    total = l2_norm_sq(k, a + b)
    assert total == pytest.approx(l2_norm_sq(k, a) + kernel_sq_integral(k, a, a + b), rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.02, 0.5), st.integers(1, 10**6))
def test_lambda_increasing(H, n):
    k = Gamma(H, 0.7)
    assert lambda_n(k, n + 1) > lambda_n(k, n)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.5), st.floats(0.05, 0.95))
def test_power_limit_cross_matches_quad(H, s):
    kbar = PowerLimit(math.sqrt(2 * H), H - 0.5)
    d = 1.0 - s
    ref = integrate.quad(lambda r: float(kbar(d + r) * kbar(r)), 0, s, limit=200)[0]
    assert kbar.cross(d, s) == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize(
    "spec,t,expected",
    [
        (RiemannLiouville(0.5), 1.0, 1.0),
        # 1 / (0.5 Gamma(0.75)^2) with Gamma from math.gamma
        (RiemannLiouville(0.25), 1.0, 1.3318717420068005),
        (ExpSum(1.0, ()), 2.0, 2.0),
    ],
    ids=["rl-half", "rl-quarter", "constant"],
)
def test_l2_norm_frozen_values(spec, t, expected):
    assert l2_norm_sq(spec, t) == pytest.approx(expected, rel=1e-12)
