import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from voltclt.bernstein_lift import rl_measure
from voltclt.errors import ConfigurationError, DomainError, RegimeError
from voltclt.kernels import FromMeasure, Gamma, PowerLimit, RiemannLiouville, limit_kernel
from voltclt.svie_sim import Affine, SimGrid, SqrtPos, SVIEModel, euler_volterra
from voltclt.variance_pricing import (
    DigitalSpec,
    PriceReport,
    Quote,
    VarianceModel,
    asymptotic_digital_price,
    c_lambda,
    calibrate_h,
    default_h_grid,
    mc_digital_price,
    read_quotes_csv,
    realized_variance,
    rl_boundary_price,
    sd_integral,
    synthetic_quotes,
    write_loss_curve_csv,
    write_quotes_csv,
)

V0, XI = 0.02, 0.3
S0 = XI * math.sqrt(V0)


def heston(H=0.3):
    return VarianceModel(SVIEModel(RiemannLiouville(H), Affine(0.3, V0), SqrtPos(XI), V0), V0)


def test_variance_model_sigma():
    assert heston().sigma_v0 == pytest.approx(S0)
    with pytest.raises(ConfigurationError):
        VarianceModel(heston().svie, -1.0)
    with pytest.raises(ConfigurationError):
        VarianceModel(SVIEModel(RiemannLiouville(0.3), Affine(0.3, V0), SqrtPos(0.0), V0), V0)


@pytest.mark.parametrize(
    "a,beta,regime",
    [(0.0, 0.0, "ATM"), (0.0, 0.1, "ATM"), (0.01, 0.4, "AATM"), (0.01, 0.3, "boundary")],
)
def test_regimes(a, beta, regime):
    assert DigitalSpec(64, a, beta).regime(0.3) == regime


def test_moderate_deviation_rejected():
    with pytest.raises(RegimeError):
        DigitalSpec(64, 0.01, 0.1).regime(0.3)
    with pytest.raises(ConfigurationError):
        DigitalSpec(0, 0.0)
    with pytest.raises(ConfigurationError):
        DigitalSpec(4, 0.0, -0.1)


def test_strike_and_maturity():
    s = DigitalSpec(16, 0.04, 0.5)
    assert s.maturity == 1 / 16
    assert s.strike(0.02) == pytest.approx(0.03)


def test_price_report_sanity():
    with pytest.raises(DomainError):
        PriceReport(1.2, 0.01, 0.5, "ATM")


def test_realized_variance_trapezoid():
    g = SimGrid(0.5, 4)
    e = euler_volterra(SVIEModel(RiemannLiouville(0.3), Affine(0.0, 0.0), SqrtPos(0.0), 0.03), g, 3, 0)
    assert np.allclose(realized_variance(e), 0.03)


@pytest.mark.parametrize("H", [0.1, 0.2, 0.3, 0.4, 0.5])
def test_sd_integral_closed_vs_quadrature(H):
    kbar = PowerLimit(math.sqrt(2 * H), H - 0.5)
    q = integrate.quad(lambda s: (math.sqrt(2 * H) * s ** (H + 0.5) / (H + 0.5)) ** 2, 0, 1, epsabs=0, epsrel=1e-13)[0]
    assert sd_integral(kbar) == pytest.approx(math.sqrt(q), rel=1e-10)


def test_c_lambda_closed_and_numeric():
    assert c_lambda(RiemannLiouville(0.3, gamma_normalized=False)) == pytest.approx(math.sqrt(0.6))
    assert c_lambda(RiemannLiouville(0.3)) == pytest.approx(math.sqrt(0.6) * math.gamma(0.8))
    assert c_lambda(Gamma(0.3, 2.0)) == c_lambda(RiemannLiouville(0.3))
    numeric = c_lambda(FromMeasure(rl_measure(0.3)), 0.3)
    assert numeric == pytest.approx(math.sqrt(0.6) * math.gamma(0.8), rel=1e-3)


def test_boundary_formula_at_zero_is_half():
    assert rl_boundary_price(0.3, 0.0, S0) == 0.5
    assert asymptotic_digital_price(heston(), DigitalSpec(64, 0.0, 0.3)) == 0.5


@pytest.mark.parametrize("H", [0.1, 0.3, 0.45])
@pytest.mark.parametrize("a", [-0.01, 0.004])
def test_general_formula_matches_rl_closed_form(H, a):
    p = asymptotic_digital_price(heston(H), DigitalSpec(2**10, a, H))
    assert p == pytest.approx(rl_boundary_price(H, a, S0), abs=1e-14)
    ref = special.ndtr(-(H + 0.5) * math.sqrt(2 * H + 2) * math.gamma(H + 0.5) * a / S0)
    assert p == pytest.approx(ref, abs=1e-14)


def test_aatm_limit_is_half():
    assert asymptotic_digital_price(heston(), DigitalSpec(64, 0.01, 0.45)) == 0.5


def test_mc_price_monotone_in_strike():
    m = heston()
    prices = [mc_digital_price(m, DigitalSpec(256, a, 0.3), 64, 5000, 1).mc_price for a in (-0.004, 0.0, 0.004)]
    assert prices[0] >= prices[1] >= prices[2]


def test_mc_report_fields():
    r = mc_digital_price(heston(), DigitalSpec(64, 0.0), 32, 2000, 2)
    d = r.to_dict()
    assert d["regime"] == "ATM" and d["asymptotic_price"] == 0.5
    assert d["inputs"]["n_paths"] == 2000
    assert r.ci_halfwidth == pytest.approx(1.96 * math.sqrt(r.mc_price * (1 - r.mc_price) / 2000))


@pytest.mark.parametrize("H", [0.3, 0.5])
def test_mc_converges_to_atm_limit(H):
    reps = [mc_digital_price(heston(H), DigitalSpec(n, 0.0), 128, 50_000, 3) for n in (2**6, 2**8, 2**10)]
    gaps = [abs(r.mc_price - 0.5) for r in reps]
    for a, b, r in zip(gaps[:-1], gaps[1:], reps[1:]):
        assert b <= a + r.ci_halfwidth


def test_default_grid():
    g = default_h_grid()
    assert g.size == 50 and g[0] == 0.01 and g[-1] == 0.5


def test_calibration_recovers_h_exactly():
    q = synthetic_quotes(0.3, V0, S0, 15)
    r = calibrate_h(q, V0, S0)
    assert r.H_hat == 0.3 and r.loss.min() == 0.0 and not r.tie
    assert r.n_used == 15


def test_calibration_with_gamma_normalised_formula():
    q = synthetic_quotes(0.2, V0, S0, 10, gamma_normalized=True)
    assert calibrate_h(q, V0, S0, gamma_normalized=True).H_hat == 0.2


def test_calibration_tie_broken_low():
    q = [Quote(1 / 64, V0, 0.5)]  # ATM quote: every H fits exactly
    r = calibrate_h(q, V0, S0)
    assert r.tie and r.H_hat == 0.01


def test_calibration_filters():
    q = synthetic_quotes(0.3, V0, S0, 15) + [Quote(0.5, V0, 0.5), Quote(1 / 64, 10 * V0, 0.0)]
    assert calibrate_h(q, V0, S0).n_used == 15
    with pytest.raises(DomainError):
        calibrate_h([Quote(0.5, V0, 0.5)], V0, S0)
    with pytest.raises(ConfigurationError):
        calibrate_h(q, V0, S0, h_grid=[0.2, 0.7])


def test_synthetic_quote_count():
    with pytest.raises(ConfigurationError):
        synthetic_quotes(0.3, V0, S0, 12)


def test_quote_csv_round_trip(tmp_path):
    q = synthetic_quotes(0.3, V0, S0, 10, noise=0.01, seed=4)
    p = tmp_path / "q.csv"
    write_quotes_csv(p, q)
    assert read_quotes_csv(p) == q
    (tmp_path / "bad.csv").write_text("maturity,price\n0.1,0.5\n")
    with pytest.raises(ConfigurationError):
        read_quotes_csv(tmp_path / "bad.csv")


def test_loss_curve_csv(tmp_path):
    r = calibrate_h(synthetic_quotes(0.3, V0, S0, 15), V0, S0)
    p = tmp_path / "loss.csv"
    write_loss_curve_csv(p, r)
    rows = p.read_text().splitlines()
    assert rows[0] == "H,L" and len(rows) == 51


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.5), st.floats(-0.05, 0.05), st.floats(-0.05, 0.05))
def test_boundary_price_monotone(H, a, b):
    lo, hi = min(a, b), max(a, b)
    assert rl_boundary_price(H, lo, S0) >= rl_boundary_price(H, hi, S0)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([0.1, 0.2, 0.3, 0.4]), st.integers(0, 10**6))
def test_noise_free_calibration_exact(H, seed):
    q = synthetic_quotes(H, V0, S0, 15, seed=seed)
    assert calibrate_h(q, V0, S0).H_hat == H
