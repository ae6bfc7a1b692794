"""Small-time CLT experiments and goodness-of-fit reports.

An experiment simulates ``X`` on ``[0, t_N / n]`` at a fixed number of steps
per unit of rescaled time (``m``, default 256), so the effective step
``t_N / (n m)`` shrinks with ``n`` and the same seed reuses the same
standard normals for every ``n``.  Samples are ``sqrt(lambda(n)) (X_{t/n} -
x_n)`` or their transformed counterparts.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from . import _quad
from .bernstein_lift import (
    BernsteinMeasure,
    HilbertElement,
    _estimate_rho,
    functional_kernel,
)
from .errors import ConfigurationError, DomainError, RegimeError
from .kernels import (
    ConstantLimit,
    KernelSpec,
    LimitKernel,
    PowerLimit,
    analyze_kernel,
    eval_kernel,
    lambda_n,
    limit_covariance,
    limit_kernel,
)
from .svie_sim import (
    SimGrid,
    SVIEModel,
    brownian_increments,
    convolution_weights,
    euler_volterra,
    exact_gaussian_limit,
)

__all__ = [
    "Identity",
    "Quadratic",
    "Polynomial",
    "ConstantSequence",
    "HarmonicSequence",
    "CLTExperiment",
    "GOFReport",
    "normalized_marginals",
    "fdd_test",
    "fclt_functional_test",
    "integral_functional_variance",
    "delta_method_samples",
    "DeltaSamples",
    "ks_trend",
    "lift_fdd_test",
    "lift_precondition_check",
    "ConditionReport",
    "KS_CRIT_95",
    "KS_SD",
    "RegimeWarning",
]

#: asymptotic 95% Kolmogorov-Smirnov critical value (times 1/sqrt(N))
KS_CRIT_95 = 1.36
#: standard deviation of the Kolmogorov distribution (times 1/sqrt(N))
KS_SD = math.sqrt(math.pi**2 / 12 - (math.pi / 2) * math.log(2) ** 2)

DEFAULT_TOLERANCES = {"ks_band_factor": 2.0, "var_se": 4.0, "frobenius": 0.02}


class RegimeWarning(UserWarning):
    """A CLT precondition is not verified for the requested kernel."""


# ---------------------------------------------------------------------------
# transforms and initial-value sequences


@dataclass(frozen=True)
class Identity:
    def __call__(self, x):
        return np.asarray(x, dtype=float)

    def d1(self, x):
        return 1.0

    def d2(self, x):
        return 0.0


@dataclass(frozen=True)
class Quadratic:
    """``scale (x - center)^2``."""

    center: float
    scale: float = 1.0

    def __call__(self, x):
        return self.scale * (np.asarray(x, dtype=float) - self.center) ** 2

    def d1(self, x):
        return 2.0 * self.scale * (x - self.center)

    def d2(self, x):
        return 2.0 * self.scale


@dataclass(frozen=True)
class Polynomial:
    """``sum_k coeffs[k] x^k``."""

    coeffs: tuple

    @property
    def _p(self):
        return np.polynomial.Polynomial(self.coeffs)

    def __call__(self, x):
        return self._p(np.asarray(x, dtype=float))

    def d1(self, x):
        return float(self._p.deriv(1)(x))

    def d2(self, x):
        return float(self._p.deriv(2)(x))


@dataclass(frozen=True)
class ConstantSequence:
    x0: float

    @property
    def limit(self):
        return self.x0

    def __call__(self, n):
        return self.x0


@dataclass(frozen=True)
class HarmonicSequence:
    """``x_n = xbar + c / n``."""

    xbar: float
    c: float

    @property
    def limit(self):
        return self.xbar

    def __call__(self, n):
        return self.xbar + self.c / n


@dataclass(frozen=True)
class CLTExperiment:
    """Model, observation times, scales and optional transform.

    ``times`` are in rescaled units (observed at ``t / n``) and must be
    multiples of ``1 / m``; they may be unordered.
    """

    model: SVIEModel
    times: tuple
    n_sequence: tuple = (16, 64, 256, 1024)
    x_sequence: Optional[object] = None
    transform: object = Identity()
    m: int = 256

    def __post_init__(self):
        t = tuple(float(s) for s in np.atleast_1d(self.times))
        if not t or min(t) <= 0 or max(t) > 1:
            raise DomainError("times must lie in (0, 1]")
        object.__setattr__(self, "times", t)
        for s in t:
            k = s * self.m
            if abs(k - round(k)) > 1e-9:
                raise DomainError(f"time {s} is not a multiple of 1/{self.m}")
        if self.x_sequence is None:
            object.__setattr__(self, "x_sequence", ConstantSequence(self.model.x0))
        xbar = self.x_sequence.limit
        if float(self.model.diffusion(np.array([xbar]))[0]) == 0.0:
            raise ConfigurationError("sigma(xbar) = 0: the Gaussian limit is degenerate", {"xbar": xbar})

    @property
    def xbar(self) -> float:
        return float(self.x_sequence.limit)

    @property
    def sigma_xbar(self) -> float:
        return float(self.model.diffusion(np.array([self.xbar]))[0])


# ---------------------------------------------------------------------------
# simulation


@dataclass
class _Scaled:
    values: np.ndarray  # X at requested times, (paths, N)
    x_n: float
    lam: float
    grid: SimGrid
    ensemble: object
    warnings: list


def _check_regime(model: SVIEModel, out: list):
    an = analyze_kernel(model.kernel, model.chi_b, model.chi_sigma)
    if not an.condition_i:
        msg = "small-time CLT condition (i) is not verified for this kernel"
        warnings.warn(msg, RegimeWarning, stacklevel=3)
        out.append(msg)
    return an


def _simulate_scaled(exp: CLTExperiment, n: int, n_paths: int, seed: int, horizon=None) -> _Scaled:
    notes: list = []
    _check_regime(exp.model, notes)
    tN = max(exp.times) if horizon is None else horizon
    n_steps = int(round(exp.m * tN))
    grid = SimGrid(tN / n, n_steps)
    x_n = float(exp.x_sequence(n))
    model = replace(exp.model, initial=x_n)
    ens = euler_volterra(model, grid, n_paths, seed)
    idx = [int(round(t * exp.m)) for t in exp.times]
    return _Scaled(ens.values[:, idx], x_n, lambda_n(exp.model.kernel, n), grid, ens, notes)


def normalized_marginals(exp: CLTExperiment, n: int, n_paths: int, seed: int) -> np.ndarray:
    """``sqrt(lambda(n)) (X_{t_j/n} - x_n)`` with shape ``(n_paths, N)``."""
    s = _simulate_scaled(exp, n, n_paths, seed)
    return math.sqrt(s.lam) * (s.values - s.x_n)


# ---------------------------------------------------------------------------
# goodness of fit


@dataclass
class GOFReport:
    """KS statistics per marginal, covariance comparison and functional tests."""

    marginals: list
    cov_empirical: Optional[np.ndarray]
    cov_target: Optional[np.ndarray]
    frobenius: Optional[float]
    projections: list = field(default_factory=list)
    functional: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    n_paths: int = 0
    seed: Optional[int] = None
    passed: dict = field(default_factory=dict)
    degenerate: bool = False
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def to_dict(self) -> dict:
        arr = lambda a: None if a is None else np.asarray(a).tolist()
        return {
            "marginals": self.marginals,
            "cov_empirical": arr(self.cov_empirical),
            "cov_target": arr(self.cov_target),
            "frobenius": self.frobenius,
            "projections": self.projections,
            "functional": self.functional,
            "tolerances": self.tolerances,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "passed": self.passed,
            "degenerate": self.degenerate,
            "warnings": self.warnings,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), default=float, **kw)


def _ks_band(n_paths, tol):
    return tol["ks_band_factor"] * KS_CRIT_95 / math.sqrt(n_paths)


def _gaussian_gof(samples, cov, times, tol, seed, n_projections):
    N = samples.shape[0]
    band = _ks_band(N, tol)
    marg, passed = [], {}
    degenerate = False
    for j, t in enumerate(times):
        v = float(cov[j, j])
        x = samples[:, j]
        var = float(np.var(x, ddof=1))
        entry = {"time": float(t), "target_var": v, "sample_var": var}
        if v == 0:
            degenerate = True
            entry.update(ks=None, pvalue=None, var_z=None, zero_variance=True)
            passed[f"marginal_{j}"] = bool(np.all(x == 0))
        else:
            ks = stats.kstest(x, "norm", args=(0.0, math.sqrt(v)))
            se = v * math.sqrt(2.0 / (N - 1))
            z = (var - v) / se
            entry.update(ks=float(ks.statistic), pvalue=float(ks.pvalue), var_z=float(z), zero_variance=False)
            passed[f"marginal_{j}_ks"] = bool(ks.statistic < band)
            passed[f"marginal_{j}_var"] = bool(abs(z) <= tol["var_se"])
        marg.append(entry)
    emp = np.atleast_2d(np.cov(samples, rowvar=False))
    frob = float(np.linalg.norm(emp - cov))
    passed["covariance"] = bool(frob < tol["frobenius"])
    proj = []
    if not degenerate and samples.shape[1] > 1:
        rng = np.random.default_rng(seed)
        for k in range(n_projections):
            v = rng.standard_normal(samples.shape[1])
            v /= np.linalg.norm(v)
            sd = math.sqrt(float(v @ cov @ v))
            ks = stats.kstest(samples @ v, "norm", args=(0.0, sd))
            proj.append({"direction": v.tolist(), "ks": float(ks.statistic), "pvalue": float(ks.pvalue)})
            passed[f"projection_{k}"] = bool(ks.statistic < band)
    return marg, emp, frob, proj, passed, degenerate


def fdd_test(
    samples,
    kbar: LimitKernel,
    sigma_xbar: float,
    times,
    tolerances: Optional[dict] = None,
    *,
    seed: int = 0,
    n_projections: int = 5,
) -> GOFReport:
    """Compare normalized marginals with the Gaussian limit.

    ``tolerances`` keys: ``ks_band_factor`` (KS distance below
    ``factor * 1.36 / sqrt(N)``), ``var_se`` (sample variance within this
    many standard errors) and ``frobenius`` (covariance error).
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise DomainError("samples are empty")
    tol = {**DEFAULT_TOLERANCES, **(tolerances or {})}
    cov = limit_covariance(kbar, sigma_xbar, times)
    marg, emp, frob, proj, passed, deg = _gaussian_gof(samples, cov, times, tol, seed, n_projections)
    return GOFReport(marg, emp, cov, frob, proj, [], tol, samples.shape[0], seed, passed, deg)


def _limit_for(model: SVIEModel) -> LimitKernel:
    an = analyze_kernel(model.kernel, model.chi_b, model.chi_sigma)
    return limit_kernel(model.kernel, numeric=an.source != "closed-form")


def integral_functional_variance(kbar: LimitKernel) -> float:
    """``integral_0^1 (integral_0^s Kbar)^2 ds``, the variance of ``integral_0^1 Y dt`` per unit ``sigma^2``."""
    if isinstance(kbar, PowerLimit):
        p = kbar.exponent
        return kbar.c**2 / ((p + 1) ** 2 * (2 * p + 3))
    if isinstance(kbar, ConstantLimit):
        return kbar.c**2 / 3.0
    return _quad.quad(lambda s: float(kbar.integral(s)) ** 2, 0.0, 1.0, what="integral functional")


def fclt_functional_test(
    exp: CLTExperiment,
    n: int,
    functional: str,
    n_paths: int,
    seed: int,
    *,
    n_target: Optional[int] = None,
    tolerances: Optional[dict] = None,
) -> dict:
    """KS test of a path functional of the normalized process on ``[0, 1]``.

    ``functional`` is ``"path-integral"`` (trapezoidal ``integral_0^1 Y dt``,
    Gaussian target) or ``"sup-abs"`` (``max |Y|``, two-sample KS against
    the Gaussian limit sampled on the same grid).
    """
    tol = {**DEFAULT_TOLERANCES, **(tolerances or {})}
    model = exp.model
    an = analyze_kernel(model.kernel, model.chi_b, model.chi_sigma)
    entry = {"functional": functional, "n": n, "n_paths": n_paths, "seed": seed}
    if not an.fclt_ok:
        entry.update(status="not-applicable", reason="functional CLT precondition min(gamma, gamma_bar) = gamma_star fails")
        return entry
    sig = exp.sigma_xbar
    s = _simulate_scaled(exp, n, n_paths, seed, horizon=1.0)
    Y = math.sqrt(s.lam) * (s.ensemble.values - s.x_n)
    dt = 1.0 / exp.m
    kbar = _limit_for(model)
    band = _ks_band(n_paths, tol)
    if functional == "path-integral":
        stat = np.trapezoid(Y, dx=dt, axis=1)
        v = sig**2 * integral_functional_variance(kbar)
        if v == 0:
            entry.update(status="degenerate")
            return entry
        ks = stats.kstest(stat, "norm", args=(0.0, math.sqrt(v)))
        entry.update(target_var=v, sample_var=float(np.var(stat, ddof=1)))
    elif functional == "sup-abs":
        stat = np.max(np.abs(Y), axis=1)
        times = np.arange(1, exp.m + 1) * dt
        nt = n_target or n_paths
        G = exact_gaussian_limit(kbar, sig, times, nt, seed + 1)
        ks = stats.ks_2samp(stat, np.max(np.abs(G), axis=1))
        band = tol["ks_band_factor"] * KS_CRIT_95 * math.sqrt(1 / n_paths + 1 / nt)
    else:
        raise ConfigurationError(f"unknown functional {functional!r}")
    entry.update(status="tested", ks=float(ks.statistic), pvalue=float(ks.pvalue), band=band, passed=bool(ks.statistic < band))
    return entry


# ---------------------------------------------------------------------------
# delta method


@dataclass
class DeltaSamples:
    """Transformed samples and their limit law.

    ``order == 1``: Gaussian with covariance ``target_cov``.  ``order == 2``:
    column ``j`` is ``chi2_scale[j] * chi^2_1`` (signed scale).
    """

    samples: np.ndarray
    order: int
    times: tuple
    target_cov: Optional[np.ndarray] = None
    chi2_scale: Optional[np.ndarray] = None

    def target_cdf(self, j: int) -> Callable:
        if self.order == 1:
            sd = math.sqrt(self.target_cov[j, j])
            return stats.norm(0.0, sd).cdf
        c = float(self.chi2_scale[j])
        if c > 0:
            return stats.chi2(1, scale=c).cdf
        return lambda x: 1.0 - stats.chi2(1, scale=-c).cdf(-np.asarray(x))

    def ks(self, j: int):
        return stats.kstest(self.samples[:, j], self.target_cdf(j))


def delta_method_samples(exp: CLTExperiment, n: int, n_paths: int, seed: int, order: Optional[int] = None) -> DeltaSamples:
    """First- or second-order delta-method samples for ``exp.transform``.

    The order is ``1`` when ``f'(xbar) != 0`` and ``2`` otherwise.  The
    second-order branch requires ``f'(xbar) = 0`` and ``sqrt(lambda(n)) f'(x_n)
    -> 0``; for the built-in sequences the latter reduces to ``f'(xbar) = 0``
    because ``|x_n - xbar| = O(1/n)`` and ``gamma_star < 1``.
    """
    f = exp.transform
    xbar = exp.xbar
    d1, d2 = float(f.d1(xbar)), float(f.d2(xbar))
    if order is None:
        order = 1 if d1 != 0 else 2
    if order == 2 and d1 != 0:
        raise ConfigurationError("second-order delta method needs f'(xbar) = 0", {"f1": d1})
    if order == 2 and d2 == 0:
        raise ConfigurationError("second-order delta method needs f''(xbar) != 0")
    if order == 2 and isinstance(exp.x_sequence, HarmonicSequence):
        d1n = float(f.d1(exp.x_sequence(n)))
        if abs(d1n) > 1e-12 and abs(d1n - 0.0) * math.sqrt(lambda_n(exp.model.kernel, n)) > 1.0:
            raise ConfigurationError("sqrt(lambda(n)) f'(x_n) is not small")
    s = _simulate_scaled(exp, n, n_paths, seed)
    diff = f(s.values) - f(s.x_n) if not isinstance(f, Identity) else s.values - s.x_n
    kbar = _limit_for(exp.model)
    sig = exp.sigma_xbar
    if order == 1:
        return DeltaSamples(math.sqrt(s.lam) * diff, 1, exp.times, d1**2 * limit_covariance(kbar, sig, exp.times))
    scale = np.array([d2 / 2 * float(kbar.sq_integral(t)) * sig**2 for t in exp.times])
    return DeltaSamples(s.lam * diff, 2, exp.times, None, scale)


def ks_trend(exp: CLTExperiment, n_paths: int, seed: int, time: float = 1.0, target_sd: Optional[float] = None) -> dict:
    """KS distance at ``time`` against ``N(0, target_var)`` along ``exp.n_sequence``.

    ``non_increasing`` allows each step to rise by at most one standard
    deviation of the Kolmogorov law, ``KS_SD / sqrt(n_paths)``.
    """
    if time not in exp.times:
        raise DomainError(f"time {time} not in experiment times")
    j = exp.times.index(time)
    if target_sd is None:
        kbar = _limit_for(exp.model)
        target_sd = exp.sigma_xbar * math.sqrt(float(kbar.sq_integral(time)))
    curve = []
    for n in exp.n_sequence:
        x = normalized_marginals(exp, n, n_paths, seed)[:, j]
        curve.append({"n": int(n), "ks": float(stats.kstest(x, "norm", args=(0.0, target_sd)).statistic)})
    se = KS_SD / math.sqrt(n_paths)
    ks = [c["ks"] for c in curve]
    ok = all(b <= a + se for a, b in zip(ks[:-1], ks[1:]))
    return {"curve": curve, "se": se, "non_increasing": ok, "target_sd": target_sd}


# ---------------------------------------------------------------------------
# lift functionals


def _component_kernels(measure, components, eta):
    out = []
    for c in components:
        if isinstance(c, KernelSpec):
            out.append((c, None))
        elif isinstance(c, HilbertElement):
            fk = functional_kernel(c, measure, eta)
            out.append((fk.kernel, fk))
        else:
            raise ConfigurationError(f"unsupported lift component {c!r}")
    return out


def _limit_of(kernel):
    an = analyze_kernel(kernel)
    if kernel.bounded:
        return ConstantLimit(1.0)
    return limit_kernel(kernel, numeric=an.source != "closed-form")


def _mixed_limit_cov(kbars, times):
    """``Sigma_ij = integral_0^(t_i ^ t_j) Kbar_i(t_i - r) Kbar_j(t_j - r) dr``."""
    m = len(times)
    if all(k == kbars[0] for k in kbars):
        return limit_covariance(kbars[0], 1.0, times)
    cov = np.zeros((m, m))
    for i in range(m):
        for j in range(i, m):
            a, (ki, kj) = min(times[i], times[j]), (kbars[i], kbars[j])
            di, dj = times[i] - a, times[j] - a

            def f(u):
                return float(ki(di + u)) * float(kj(dj + u))

            cov[i, j] = cov[j, i] = _quad.quad_log(f, 0.0, a, epsrel=1e-10, what="lift covariance")
    return cov


def lift_fdd_test(
    model: SVIEModel,
    measure: BernsteinMeasure,
    components: Sequence,
    times,
    n: int,
    n_paths: int,
    seed: int,
    *,
    eta: float = 0.0,
    m: int = 256,
    target_cov=None,
    tolerances: Optional[dict] = None,
) -> tuple:
    """Joint CLT for component processes ``Xbar^j = K_j * (b(X) ds + sigma(X) dB)``.

    Each component (a functional ``y_j`` of the lift or a kernel ``K_j``) is
    evaluated at ``t_j / n`` from the same simulated path and noise and
    scaled by ``sqrt(lambda_j(n))``.  Components whose kernel is the model
    kernel reuse ``X - g`` directly, so ``y = w_eta`` reproduces
    :func:`normalized_marginals`.

    Returns
    -------
    report : GOFReport
    samples : ndarray, shape (n_paths, N)
    """
    tol = {**DEFAULT_TOLERANCES, **(tolerances or {})}
    times = tuple(float(t) for t in times)
    if len(times) != len(components):
        raise ConfigurationError("one time per component is required")
    comps = _component_kernels(measure, components, eta)
    notes = []
    tN = max(times)
    grid = SimGrid(tN / n, int(round(m * tN)))
    ens = euler_volterra(model, grid, n_paths, seed)
    X = ens.values
    noise = brownian_increments(seed, grid.n_steps, grid.dt, 0, n_paths)[ens.path_index]
    g = model.g(grid.times)
    bX = model.drift(X[:, :-1])
    sX = model.diffusion(X[:, :-1]) * noise
    cols, kbars = [], []
    for (K, fk), t in zip(comps, times):
        k = int(round(t * m))
        if abs(t * m - k) > 1e-9:
            raise DomainError(f"time {t} is not a multiple of 1/{m}")
        lam = lambda_n(K, n)
        if K == model.kernel:
            col = X[:, k] - g[k]
        else:
            wb, ws = convolution_weights(K, grid)
            col = bX[:, :k] @ wb[k - 1 :: -1] + sX[:, :k] @ ws[k - 1 :: -1]
        cols.append(math.sqrt(lam) * col)
        kbars.append(_limit_of(K))
        if fk is not None and fk.rho is None:
            notes.append(f"density bound of component {len(cols) - 1} not verified")
    samples = np.column_stack(cols)
    sig0 = float(model.diffusion(np.array([g[0]]))[0])
    base = _mixed_limit_cov(kbars, times) if target_cov is None else np.asarray(target_cov, dtype=float)
    cov = sig0**2 * base
    marg, emp, frob, proj, passed, deg = _gaussian_gof(samples, cov, times, tol, seed, 5)
    rep = GOFReport(marg, emp, cov, frob, proj, [], tol, n_paths, seed, passed, deg, notes)
    return rep, samples


@dataclass
class Condition:
    name: str
    lhs: float
    rhs: float
    satisfied: bool
    note: str = ""

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def to_dict(self):
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "satisfied": self.satisfied, "margin": self.margin, "note": self.note}


@dataclass
class ConditionReport:
    conditions: list
    gamma_star: float
    rho: Optional[float]
    eta_star: float
    limit_branch: str

    @property
    def all_satisfied(self) -> bool:
        return all(c.satisfied for c in self.conditions)

    def get(self, name) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {
            "conditions": [c.to_dict() for c in self.conditions],
            "gamma_star": self.gamma_star,
            "rho": self.rho,
            "eta_star": self.eta_star,
            "limit_branch": self.limit_branch,
            "all_satisfied": self.all_satisfied,
        }


def _pos(x):
    return max(x, 0.0)


def lift_precondition_check(
    measure: BernsteinMeasure,
    functionals: Sequence[HilbertElement],
    chi_sigma: float,
    chi_g: float,
    eta: float,
    *,
    theta: Optional[float] = None,
) -> ConditionReport:
    """Evaluate the lift-CLT conditions for functionals ``y_j``.

    Conditions reported (``chi_g = inf`` for a constant initial value):

    * ``lambda-growth``: ``lambda_j(n) <= C n^(2 gamma_star)`` on ``n = 2^4, 2^6, ..., 2^16``;
    * ``corridor``: ``gamma_star < min{1, 1 - eta - eta_star}/2 + min{1/2 - eta_star^+, chi_g} chi_sigma``;
    * ``density-corridor``: ``gamma_star < 1/2 - (eta_star + rho)^+ + min{1/2 - eta_star^+, chi_g} chi_sigma``
      and ``rho_j < 1/2 - eta_star``;
    * ``theta-integral``: ``integral (1+x)^theta |y_j| dmu < inf`` with
      ``theta > eta - 1/2`` and ``gamma_star < 1/2 + theta - eta``.  If
      ``theta`` is omitted, the midpoint of the admissible interval is used
      (when it is empty, the smallest ``theta`` allowed by the gamma
      condition is reported and the integral is infinite).
    """
    es = measure.eta_star
    es_pos = _pos(es) if np.isfinite(es) else 0.0
    fks = [functional_kernel(y, measure, eta) for y in functionals]
    analyses = [analyze_kernel(fk.kernel) for fk in fks]
    gstar = max(a.gamma_star for a in analyses)
    conds = []
    ns = 2.0 ** np.arange(4, 17, 2)
    ratios = [max(lambda_n(fk.kernel, int(k)) / k ** (2 * gstar) for k in ns) for fk in fks]
    tails = [lambda_n(fk.kernel, int(ns[-1])) / ns[-1] ** (2 * gstar) for fk in fks]
    heads = [lambda_n(fk.kernel, int(ns[-3])) / ns[-3] ** (2 * gstar) for fk in fks]
    bounded = all(t <= 1.05 * h for t, h in zip(tails, heads))
    conds.append(Condition("lambda-growth", max(tails), max(ratios), bounded, "sup_n lambda_j(n) / n^(2 gamma_star) stays bounded"))
    hold = min(0.5 - es_pos, chi_g) * chi_sigma
    rhs = min(1.0, 1.0 - eta - es if np.isfinite(es) else 1.0) / 2 + hold
    conds.append(Condition("corridor", gstar, rhs, gstar < rhs))
    rhos = [fk.rho for fk in fks]
    if any(r is None for r in rhos):
        conds.append(Condition("density-corridor", gstar, float("nan"), False, "density bound not verifiable"))
        rho = None
    else:
        rho = max(rhos)
        shift = _pos(es + rho) if np.isfinite(es) and np.isfinite(rho) else 0.0
        rhs2 = 0.5 - shift + hold
        ok_rho = all(r < 0.5 - es_pos for r in rhos) if np.isfinite(es) else True
        conds.append(Condition("density-corridor", gstar, rhs2, bool(gstar < rhs2 and ok_rho)))
    # theta-integral: finite iff theta < -(tail slope of y) - eta_star
    slopes = [_estimate_rho(lambda x, y=y: y(x)) for y in functionals]
    if any(s is None for s in slopes):
        conds.append(Condition("theta-integral", float("nan"), float("nan"), False, "tail of y not identifiable"))
    else:
        theta_max = min((-s - es) if np.isfinite(es) and np.isfinite(s) else np.inf for s in slopes)
        theta_min = max(eta - 0.5, gstar + eta - 0.5)
        if theta is None:
            theta = 0.5 * (theta_min + theta_max) if np.isfinite(theta_max) and theta_max > theta_min else (
                theta_min + 1.0 if not np.isfinite(theta_max) else theta_min + 1e-9
            )
        finite = theta < theta_max
        note = "integral finite" if finite else "integral infinite"
        conds.append(Condition("theta-integral", float(theta), float(theta_max), bool(finite), note))
        conds.append(Condition("theta-gamma", gstar, 0.5 + theta - eta, bool(gstar < 0.5 + theta - eta and theta > eta - 0.5)))
    branch = "constant" if all(fk.kernel.bounded for fk in fks) else "power-or-numeric"
    return ConditionReport(conds, gstar, rho, es, branch)
