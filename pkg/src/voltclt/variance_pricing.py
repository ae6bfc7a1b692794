"""Digital calls on average realized variance at small maturities.

The payoff is ``1{V_T >= K}`` with ``V_T = T^-1 integral_0^T v_t dt`` and
maturity ``T = 1/n``.  For strikes ``v0 + n^(-beta) a`` the small-time CLT
gives the limit price 1/2 when ``a = 0`` or ``beta > gamma_star`` and

    1 - Phi(C_lambda a / (sigma(v0) sd_integral(Kbar)))

when ``beta = gamma_star``, where ``sqrt(lambda(n)) ~ C_lambda n^gamma_star``
and ``sd_integral(Kbar)^2 = integral_0^1 (integral_0^s Kbar)^2 ds``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special, stats

from .clt_harness import integral_functional_variance
from .errors import ConfigurationError, DomainError, RegimeError
from .kernels import (
    Gamma,
    KernelSpec,
    LimitKernel,
    RiemannLiouville,
    analyze_kernel,
    lambda_n,
    limit_kernel,
)
from .svie_sim import PathEnsemble, SimGrid, SVIEModel, euler_volterra

__all__ = [
    "VarianceModel",
    "DigitalSpec",
    "PriceReport",
    "realized_variance",
    "mc_digital_price",
    "asymptotic_digital_price",
    "rl_boundary_price",
    "sd_integral",
    "c_lambda",
    "calibrate_h",
    "CalibrationResult",
    "Quote",
    "synthetic_quotes",
    "read_quotes_csv",
    "write_quotes_csv",
    "write_loss_curve_csv",
]


@dataclass(frozen=True)
class VarianceModel:
    """Variance SVIE with ``sigma_v0 = sigma(v0) > 0``."""

    svie: SVIEModel
    v0: float
    sigma_v0: Optional[float] = None

    def __post_init__(self):
        if not self.v0 > 0:
            raise ConfigurationError("v0 must be positive")
        if self.sigma_v0 is None:
            object.__setattr__(self, "sigma_v0", float(self.svie.diffusion(np.array([self.v0]))[0]))
        if not self.sigma_v0 > 0:
            raise ConfigurationError("sigma(v0) must be positive", {"sigma_v0": self.sigma_v0})


@dataclass(frozen=True)
class DigitalSpec:
    """Maturity ``1/n`` and strike ``v0 + n^(-beta) a``."""

    n: int
    a: float
    beta: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError("n must be a positive integer")
        if self.beta < 0:
            raise ConfigurationError("beta must be nonnegative")

    @property
    def maturity(self) -> float:
        return 1.0 / self.n

    def strike(self, v0: float) -> float:
        return v0 + self.n ** (-self.beta) * self.a

    def regime(self, gamma_star: float, tol: float = 1e-12) -> str:
        if self.a == 0:
            return "ATM"
        if abs(self.beta - gamma_star) <= tol:
            return "boundary"
        if self.beta > gamma_star:
            return "AATM"
        raise RegimeError(
            "beta < gamma_star with a != 0 is a moderate-deviation regime, not covered",
            {"beta": self.beta, "gamma_star": gamma_star},
        )


@dataclass
class PriceReport:
    mc_price: Optional[float]
    ci_halfwidth: Optional[float]
    asymptotic_price: Optional[float]
    regime: str
    inputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mc_price is not None:
            lo, hi = self.mc_price - self.ci_halfwidth, self.mc_price + self.ci_halfwidth
            if lo < -0.01 or hi > 1.01:
                raise DomainError("MC price interval outside [-0.01, 1.01]", {"lo": lo, "hi": hi})

    def to_dict(self):
        return {
            "mc_price": self.mc_price,
            "ci_halfwidth": self.ci_halfwidth,
            "asymptotic_price": self.asymptotic_price,
            "regime": self.regime,
            "inputs": self.inputs,
        }


def realized_variance(paths: PathEnsemble) -> np.ndarray:
    """Trapezoidal ``T^-1 integral_0^T v dt`` per path."""
    v = np.asarray(paths.values, dtype=float)
    return np.trapezoid(v, dx=paths.grid.dt, axis=1) / paths.grid.T


def mc_digital_price(
    model: VarianceModel,
    spec: DigitalSpec,
    n_steps_per_maturity: int = 256,
    n_paths: int = 100_000,
    seed: int = 0,
    *,
    with_asymptotic: bool = True,
) -> PriceReport:
    """Monte Carlo price with a 95% normal-approximation CI halfwidth."""
    grid = SimGrid(spec.maturity, n_steps_per_maturity)
    ens = euler_volterra(model.svie, grid, n_paths, seed)
    V = realized_variance(ens)
    payoff = (V >= spec.strike(model.v0)).astype(float)
    p = float(payoff.mean())
    hw = 1.96 * math.sqrt(p * (1 - p) / payoff.size)
    an = analyze_kernel(model.svie.kernel, model.svie.chi_b, model.svie.chi_sigma)
    regime = spec.regime(an.gamma_star)
    asym = asymptotic_digital_price(model, spec) if with_asymptotic else None
    inputs = {
        "n": spec.n,
        "a": spec.a,
        "beta": spec.beta,
        "strike": spec.strike(model.v0),
        "v0": model.v0,
        "sigma_v0": model.sigma_v0,
        "n_steps_per_maturity": n_steps_per_maturity,
        "n_paths": int(payoff.size),
        "n_flagged": ens.n_flagged,
        "seed": seed,
    }
    return PriceReport(p, hw, asym, regime, inputs)


def sd_integral(kbar: LimitKernel) -> float:
    """``sqrt(integral_0^1 (integral_0^s Kbar(t) dt)^2 ds)``."""
    return math.sqrt(integral_functional_variance(kbar))


def c_lambda(kernel: KernelSpec, gamma_star: Optional[float] = None, *, rtol: float = 1e-4) -> float:
    """Constant ``C_lambda`` with ``sqrt(lambda(n)) ~ C_lambda n^gamma_star``.

    Closed form for Riemann-Liouville kernels ``c t^(H-1/2)``:
    ``sqrt(2H) / c``; gamma kernels share the small-time constant.
    Otherwise the ratio is tracked along ``n = 2^8, 2^10, ..., 2^24`` and
    accepted once successive values agree to ``rtol``.
    """
    if isinstance(kernel, (RiemannLiouville, Gamma)):
        return math.sqrt(2 * kernel.H) / kernel.scale
    if gamma_star is None:
        gamma_star = analyze_kernel(kernel).gamma_star
    prev = None
    ratios = []
    for k in range(8, 25, 2):
        n = 2.0**k
        r = math.sqrt(lambda_n(kernel, n)) / n**gamma_star
        ratios.append(r)
        if prev is not None and abs(r - prev) <= rtol * abs(r):
            return r
        prev = r
    raise RegimeError("sqrt(lambda(n)) / n^gamma_star does not converge", {"ratios": ratios})


def rl_boundary_price(H: float, a: float, sigma_v0: float, gamma_normalized: bool = True) -> float:
    """Boundary-regime limit for ``c t^(H-1/2)``: ``1 - Phi((H+1/2) sqrt(2H+2) [Gamma(H+1/2)] a / sigma)``.

    The gamma factor appears when the kernel carries ``c = 1/Gamma(H+1/2)``.
    """
    g = special.gamma(H + 0.5) if gamma_normalized else 1.0
    return float(special.ndtr(-(H + 0.5) * math.sqrt(2 * H + 2) * g * a / sigma_v0))


def asymptotic_digital_price(
    model: VarianceModel,
    spec: DigitalSpec,
    kbar: Optional[LimitKernel] = None,
    C_lambda: Optional[float] = None,
) -> float:
    """Limit price for the regime of ``spec``; ``kbar`` and ``C_lambda`` default to the kernel's."""
    kernel = model.svie.kernel
    an = analyze_kernel(kernel, model.svie.chi_b, model.svie.chi_sigma)
    regime = spec.regime(an.gamma_star)
    if regime in ("ATM", "AATM"):
        return 0.5
    if kbar is None:
        kbar = limit_kernel(kernel, numeric=an.source != "closed-form")
    if C_lambda is None:
        C_lambda = c_lambda(kernel, an.gamma_star)
    z = C_lambda * spec.a / (model.sigma_v0 * sd_integral(kbar))
    return float(special.ndtr(-z))


# ---------------------------------------------------------------------------
# calibration


@dataclass(frozen=True)
class Quote:
    maturity: float
    strike: float
    price: float


def _price_formula(H, a, sigma_v0, gamma_normalized):
    g = special.gamma(H + 0.5) if gamma_normalized else 1.0
    return 1.0 - special.ndtr(math.sqrt(2 * H + 2) * (H + 0.5) * g * a / sigma_v0)


@dataclass
class CalibrationResult:
    H_hat: float
    h_grid: np.ndarray
    loss: np.ndarray
    n_used: int
    tie: bool
    filter: dict

    def to_dict(self):
        return {
            "H_hat": self.H_hat,
            "h_grid": self.h_grid.tolist(),
            "loss": self.loss.tolist(),
            "n_used": self.n_used,
            "tie": self.tie,
            "filter": self.filter,
        }


def default_h_grid(step: float = 0.01) -> np.ndarray:
    k = int(round(0.5 / step))
    return np.round(np.arange(1, k + 1) * step, 12)


def calibrate_h(
    quotes: Sequence[Quote],
    v0: float,
    sigma_v0: float,
    h_grid=None,
    delta: float = 1.0 / 16,
    Delta=None,
    *,
    gamma_normalized: bool = False,
) -> CalibrationResult:
    """Grid-search ``argmin_H sum_i |formula(H, i) - price_i|^2``.

    ``a(H, i) = n_i^H (K_i - v0)`` with ``n_i = floor(1/T_i)``.  Quotes with
    ``T_i >= delta`` or ``|K_i - v0| >= Delta_i`` are dropped; the default
    ``Delta_i = 0.5 v0 n_i^(-min(h_grid))``.  Ties go to the smallest ``H``.
    """
    grid = default_h_grid() if h_grid is None else np.asarray(h_grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0) or np.any(grid > 0.5):
        raise ConfigurationError("h_grid must be a nonempty subset of (0, 1/2]")
    used = []
    for q in quotes:
        if not q.maturity < delta:
            continue
        n_i = math.floor(1.0 / q.maturity)
        window = 0.5 * v0 * n_i ** (-float(grid.min())) if Delta is None else float(Delta)
        if abs(q.strike - v0) < window:
            used.append((n_i, q.strike - v0, q.price))
    if not used:
        raise DomainError("no quotes survive the maturity/strike filter", {"delta": delta, "Delta": Delta})
    loss = np.empty(grid.size)
    for k, H in enumerate(grid):
        loss[k] = sum((_price_formula(H, n_i**H * d, sigma_v0, gamma_normalized) - p) ** 2 for n_i, d, p in used)
    best = int(np.argmin(loss))  # first minimum = smallest H
    tie = int(np.sum(loss == loss[best])) > 1
    filt = {"delta": delta, "Delta": "0.5*v0*n^-min(h_grid)" if Delta is None else Delta}
    return CalibrationResult(float(grid[best]), grid, loss, len(used), tie, filt)


def synthetic_quotes(
    H: float,
    v0: float,
    sigma_v0: float,
    n_quotes: int = 15,
    *,
    noise: float = 0.0,
    seed: int = 0,
    n_values=(32, 64, 128, 256, 512),
    gamma_normalized: bool = False,
) -> list:
    """Quotes from the boundary formula on maturities ``1/n`` and strikes
    ``v0 + q 0.5 v0 n^(-1/2)`` with ``q`` evenly spaced in ``[-1, 1]``.

    ``noise`` adds seeded Gaussian noise to prices (clipped to ``[0, 1]``).
    """
    n_values = tuple(n_values)
    if n_quotes % len(n_values):
        raise ConfigurationError(f"n_quotes must be a multiple of {len(n_values)}")
    qs = np.linspace(-1.0, 1.0, n_quotes // len(n_values))
    rng = np.random.default_rng(seed)
    out = []
    for n in n_values:
        for q in qs:
            K = v0 + q * 0.5 * v0 * n**-0.5
            p = _price_formula(H, n**H * (K - v0), sigma_v0, gamma_normalized)
            if noise:
                p = float(np.clip(p + noise * rng.standard_normal(), 0.0, 1.0))
            out.append(Quote(1.0 / n, float(K), float(p)))
    return out


def read_quotes_csv(path) -> list:
    """Columns ``maturity, strike, price``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    try:
        return [Quote(float(r["maturity"]), float(r["strike"]), float(r["price"])) for r in rows]
    except KeyError as exc:
        raise ConfigurationError(f"quote CSV is missing column {exc}") from None


def write_quotes_csv(path, quotes) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["maturity", "strike", "price"])
        for q in quotes:
            w.writerow([repr(q.maturity), repr(q.strike), repr(q.price)])


def write_loss_curve_csv(path, result: CalibrationResult) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["H", "L"])
        for h, l in zip(result.h_grid, result.loss):
            w.writerow([repr(float(h)), repr(float(l))])
