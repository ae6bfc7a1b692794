"""Bernstein measures, the weighted Hilbert spaces on them, and finite lifts.

A completely monotone kernel is written ``K(t) = K(inf) + integral exp(-x t) mu(dx)``.
:class:`BernsteinMeasure` stores ``K(inf)``, atoms and density segments.
Elements of the weighted space ``H_eta`` are :class:`HilbertElement` objects
(a value at the origin plus a function on ``(0, inf)``); the projection
``Xi``, the inner product and the multiplication semigroup act on them.

:func:`discretize_measure` turns a measure into an N-node exponential sum
(:class:`QuadratureLift`) and :func:`simulate_lift` runs the corresponding
finite-dimensional Markovian system on the same Brownian increments as the
convolution simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import special

from . import _quad
from .errors import (
    ApproximationError,
    ConfigurationError,
    DomainError,
    IndeterminateError,
)
from .kernels import (
    ExpSum,
    FromMeasure,
    Gamma,
    KernelSpec,
    LogModulated,
    RiemannLiouville,
    Shifted,
    eval_kernel,
    increment_l2,
    l2_norm_sq,
)

__all__ = [
    "PowerDensity",
    "LogKernelDensity",
    "TiltedDensity",
    "WeightedDensity",
    "BernsteinMeasure",
    "HilbertElement",
    "QuadratureLift",
    "LiftState",
    "LiftRun",
    "FunctionalKernel",
    "LiftBoundReport",
    "rl_measure",
    "log_kernel_measure",
    "atomic_measure",
    "measure_for_kernel",
    "measure_to_dict",
    "measure_from_dict",
    "eta_star",
    "xi_projection",
    "inner_product_eta",
    "hilbert_norm",
    "semigroup_apply",
    "kappa",
    "semigroup_bound_check",
    "weight_element",
    "kernel_element",
    "constant_element",
    "discretize_measure",
    "simulate_lift",
    "verify_lift_kernel_bounds",
    "functional_kernel",
]


# ---------------------------------------------------------------------------
# densities on (lo, inf)


class _Density:
    """Density on ``(lo, inf)``.  Subclasses override the closed forms they have."""

    lo = 0.0

    def pdf(self, x):
        raise NotImplementedError

    @property
    def eta_star(self) -> float:
        return _numeric_eta_star(self)

    def integrate(self, f, a=None, b=np.inf, scale=1.0):
        """``integral_a^b f(x) pdf(x) dx`` with ``a`` defaulting to ``lo``."""
        a = self.lo if a is None else max(a, self.lo)
        if b <= a:
            return 0.0
        lo = self.lo
        g = lambda z: float(f(lo + z)) * float(self.pdf(lo + z))
        if np.isinf(b):
            if a == lo:
                return _quad.quad_halfline(g, 0.0, scale=scale, what="density integral")
            return _quad.quad_halfline(lambda z: g(z + (a - lo)), 0.0, scale=scale, what="density integral")
        return _quad.quad_log(g, a - lo, b - lo, what="density integral")

    def mass(self, a, b):
        return self.integrate(lambda x: 1.0, a, b)

    def first_moment(self, a, b):
        return self.integrate(lambda x: x, a, b)

    def laplace(self, t):
        """``integral exp(-x t) pdf(x) dx`` or ``None`` if no closed form."""
        return None

    def tail_laplace(self, t, x0):
        return self.integrate(lambda x: math.exp(-x * t), x0, np.inf, scale=1.0 / t)

    @property
    def infinite_mass(self) -> bool:
        return True


@dataclass(frozen=True)
class PowerDensity(_Density):
    """``scale * (x - shift)^(-alpha)`` on ``(shift, inf)``.

    With the default ``scale = 1/(Gamma(alpha) Gamma(1 - alpha))`` the kernel
    is ``exp(-shift t) t^(alpha - 1) / Gamma(alpha)``.
    """

    alpha: float
    shift: float = 0.0
    scale: Optional[float] = None

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ConfigurationError(f"alpha={self.alpha} must lie in (0, 1)")
        if self.shift < 0:
            raise ConfigurationError("shift must be nonnegative")
        if self.scale is None:
            object.__setattr__(
                self, "scale", 1.0 / (special.gamma(self.alpha) * special.gamma(1.0 - self.alpha))
            )

    @property
    def lo(self):
        return self.shift

    def pdf(self, x):
        z = np.asarray(x, dtype=float) - self.shift
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(z > 0, self.scale * np.abs(z) ** (-self.alpha), 0.0)

    @property
    def eta_star(self):
        return 1.0 - self.alpha

    def _prim(self, x):
        z = max(x - self.shift, 0.0)
        return z ** (1 - self.alpha) / (1 - self.alpha)

    def mass(self, a, b):
        if np.isinf(b):
            return np.inf
        return self.scale * (self._prim(b) - self._prim(a))

    def first_moment(self, a, b):
        if np.isinf(b):
            return np.inf
        al, s = self.alpha, self.shift
        f = lambda x: max(x - s, 0.0) ** (2 - al) / (2 - al) + s * self._prim(x)
        return self.scale * (f(b) - f(a))

    def laplace(self, t):
        t = np.asarray(t, dtype=float)
        return self.scale * special.gamma(1 - self.alpha) * t ** (self.alpha - 1) * np.exp(-self.shift * t)

    def tail_laplace(self, t, x0):
        a = 1 - self.alpha
        z0 = max(x0 - self.shift, 0.0)
        return (
            self.scale * special.gamma(a) * special.gammaincc(a, t * z0) * t ** (-a) * math.exp(-self.shift * t)
        )


def _ein(x):
    """``integral_0^x (1 - exp(-u))/u du`` (entire exponential integral)."""
    if x < 1.0:
        k = np.arange(1, 30)
        terms = (-1.0) ** (k + 1) * x**k / (k * special.factorial(k))
        return float(np.sum(terms))
    return float(special.exp1(x) + math.log(x) + np.euler_gamma)


@dataclass(frozen=True)
class LogKernelDensity(_Density):
    """``(1 - exp(-x))/x`` on ``(0, inf)``; kernel ``log(1 + 1/t)``."""

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 0, -np.expm1(-x) / np.where(x > 0, x, 1.0), 0.0)

    @property
    def eta_star(self):
        return 0.0

    def mass(self, a, b):
        if np.isinf(b):
            return np.inf
        return _ein(b) - _ein(max(a, 0.0))

    def first_moment(self, a, b):
        if np.isinf(b):
            return np.inf
        f = lambda x: x + math.expm1(-x)
        return f(b) - f(max(a, 0.0))

    def laplace(self, t):
        return np.log1p(1.0 / np.asarray(t, dtype=float))


@dataclass(frozen=True)
class TiltedDensity(_Density):
    """``exp(-epsilon x) * base``: the measure of the shifted kernel ``K(. + epsilon)``."""

    base: _Density
    epsilon: float

    @property
    def lo(self):
        return self.base.lo

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-self.epsilon * x) * self.base.pdf(x)

    @property
    def eta_star(self):
        return -np.inf

    @property
    def infinite_mass(self):
        return False

    def integrate(self, f, a=None, b=np.inf, scale=1.0):
        return super().integrate(f, a, b, scale=min(scale, 1.0 / self.epsilon))

    def laplace(self, t):
        inner = self.base.laplace(np.asarray(t, dtype=float) + self.epsilon)
        return inner


@dataclass(frozen=True)
class WeightedDensity(_Density):
    """``weight(x) * base``; ``rho`` is the power growth of ``weight`` (``-inf`` for decay)."""

    base: _Density
    weight: Callable = field(compare=False)
    rho: Optional[float] = None
    label: str = ""

    @property
    def lo(self):
        return self.base.lo

    def pdf(self, x):
        return np.asarray(self.weight(np.asarray(x, dtype=float)), dtype=float) * self.base.pdf(x)

    @property
    def eta_star(self):
        if self.rho is None:
            return _numeric_eta_star(self)
        if np.isneginf(self.rho):
            return -np.inf
        return self.base.eta_star + self.rho

    @property
    def infinite_mass(self):
        return self.eta_star >= 0


def _numeric_eta_star(dens):
    """Tail exponent from the log-log slope of the density at large ``x``.

    ``pdf ~ x^s`` gives ``eta_star = 1 + s``; faster-than-power decay gives
    ``-inf``.
    """
    xs = dens.lo + np.logspace(4, 10, 13)
    v = np.abs(np.asarray(dens.pdf(xs), dtype=float))
    probe = {"x": xs.tolist(), "pdf": v.tolist()}
    if np.all(v == 0):
        return -np.inf
    if np.any(v == 0) or np.any(~np.isfinite(v)):
        raise IndeterminateError("density tail has zeros or non-finite values", probe)
    lx, lv = np.log(xs), np.log(v)
    s1 = np.polyfit(lx[:7], lv[:7], 1)[0]
    s2 = np.polyfit(lx[6:], lv[6:], 1)[0]
    if s2 < -50:
        return -np.inf
    if abs(s1 - s2) > 0.05:
        raise IndeterminateError("tail slope not stable", dict(probe, slopes=[s1, s2]))
    return float(1.0 + s2)


def _density_to_dict(d):
    if isinstance(d, PowerDensity):
        out = {"family": "rl", "alpha": d.alpha}
        if d.shift:
            out["beta"] = d.shift
        return out
    if isinstance(d, LogKernelDensity):
        return {"family": "log"}
    if isinstance(d, TiltedDensity):
        return {"family": "tilted", "epsilon": d.epsilon, "base": _density_to_dict(d.base)}
    raise ConfigurationError(f"density {type(d).__name__} has no catalog form")


def _density_from_dict(d):
    fam = d.get("family")
    if fam == "rl":
        return PowerDensity(float(d["alpha"]), float(d.get("beta", 0.0)))
    if fam == "log":
        return LogKernelDensity()
    if fam == "tilted":
        return TiltedDensity(_density_from_dict(d["base"]), float(d["epsilon"]))
    raise ConfigurationError(f"unknown density family {fam!r}")


# ---------------------------------------------------------------------------
# measures


@dataclass(frozen=True)
class BernsteinMeasure:
    """``k_infinity`` plus atoms ``(x_i, c_i)`` plus density segments.

    ``kernel_hint`` is the closed-form kernel with this measure when known;
    it is used for fast kernel evaluation but never for the projection
    ``Xi`` (which always integrates against the measure).
    """

    k_infinity: float = 0.0
    atoms: Tuple[Tuple[float, float], ...] = ()
    densities: Tuple[_Density, ...] = ()
    kernel_hint: Optional[KernelSpec] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple((float(x), float(c)) for x, c in self.atoms))
        object.__setattr__(self, "densities", tuple(self.densities))
        if self.k_infinity < 0:
            raise ConfigurationError("k_infinity must be nonnegative")
        for x, c in self.atoms:
            if not (x > 0 and c > 0):
                raise ConfigurationError(f"atom ({x}, {c}) needs location > 0 and mass > 0")

    @property
    def eta_star(self) -> float:
        vals = [d.eta_star for d in self.densities]
        return max(vals) if vals else -np.inf

    def total_mass_finite(self) -> bool:
        return not any(d.infinite_mass for d in self.densities)

    def integrate(self, f, scale=1.0):
        """``integral f dmu`` over ``(0, inf)``; ``f`` accepts arrays."""
        total = 0.0
        if self.atoms:
            xs = np.array([a[0] for a in self.atoms])
            cs = np.array([a[1] for a in self.atoms])
            total += float(np.sum(cs * np.asarray(f(xs), dtype=float)))
        for d in self.densities:
            total += d.integrate(f, scale=scale)
        return total

    def mass(self, a, b):
        """``mu((a, b])``."""
        m = sum(c for x, c in self.atoms if a < x <= b)
        for d in self.densities:
            m += d.mass(max(a, d.lo), b) if b > d.lo else 0.0
        return m

    def kernel_value(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tt = np.atleast_1d(t)
        out = np.full(tt.shape, self.k_infinity, dtype=float)
        for x, c in self.atoms:
            out += c * np.exp(-x * tt)
        for d in self.densities:
            lap = d.laplace(tt)
            if lap is None:
                lap = np.array([d.integrate(lambda x, s=s: np.exp(-x * s), scale=1.0 / s) for s in tt])
            out += lap
        return float(out[0]) if scalar else out

    def integral_of_kernel(self, t):
        """``integral_0^t K`` via ``integral (1 - exp(-x t))/x mu(dx)``."""
        f = lambda x: -np.expm1(-np.asarray(x) * t) / np.asarray(x)
        return self.k_infinity * t + self.integrate(f, scale=1.0 / t)

    def kernel(self) -> KernelSpec:
        return self.kernel_hint if self.kernel_hint is not None else FromMeasure(self)

    def tilted(self, epsilon: float) -> "BernsteinMeasure":
        """Measure of ``K(. + epsilon)``."""
        hint = Shifted(self.kernel_hint, epsilon) if self.kernel_hint is not None else None
        return BernsteinMeasure(
            self.k_infinity,
            tuple((x, c * math.exp(-epsilon * x)) for x, c in self.atoms),
            tuple(TiltedDensity(d, epsilon) for d in self.densities),
            kernel_hint=hint,
        )

    def to_dict(self):
        return measure_to_dict(self)


def rl_measure(H: float, beta: float = 0.0) -> BernsteinMeasure:
    """Measure of the (gamma-)Riemann-Liouville kernel with ``1/Gamma(H+1/2)`` scaling."""
    if not (0.0 < H < 0.5):
        raise ConfigurationError("rl_measure needs H in (0, 1/2)")
    hint = RiemannLiouville(H) if beta == 0 else Gamma(H, beta)
    return BernsteinMeasure(0.0, (), (PowerDensity(H + 0.5, beta),), kernel_hint=hint)


def log_kernel_measure() -> BernsteinMeasure:
    """Measure of ``log(1 + 1/t)``."""
    return BernsteinMeasure(0.0, (), (LogKernelDensity(),), kernel_hint=LogModulated(0.5, 1.0))


def atomic_measure(atoms, k_infinity: float = 0.0) -> BernsteinMeasure:
    """Atoms ``(x_i, c_i)``; the kernel is ``k_infinity + sum c_i exp(-x_i t)``."""
    atoms = tuple((float(x), float(c)) for x, c in atoms)
    hint = ExpSum(k_infinity, tuple((c, x) for x, c in atoms))
    return BernsteinMeasure(k_infinity, atoms, (), kernel_hint=hint)


def measure_for_kernel(spec: KernelSpec) -> BernsteinMeasure:
    """Bernstein measure of a built-in completely monotone kernel."""
    if isinstance(spec, RiemannLiouville) and spec.gamma_normalized and spec.H < 0.5:
        return rl_measure(spec.H)
    if isinstance(spec, Gamma) and spec.gamma_normalized and spec.H < 0.5:
        return rl_measure(spec.H, spec.beta)
    if isinstance(spec, RiemannLiouville) and spec.H == 0.5:
        return BernsteinMeasure(spec.scale, kernel_hint=spec)
    if isinstance(spec, ExpSum):
        m = BernsteinMeasure(spec.c0, tuple((lam, c) for c, lam in spec.terms if lam > 0), kernel_hint=spec)
        extra = sum(c for c, lam in spec.terms if lam == 0)
        return replace(m, k_infinity=spec.c0 + extra) if extra else m
    if isinstance(spec, LogModulated) and spec.H == 0.5 and spec.alpha == 1.0:
        return log_kernel_measure()
    if isinstance(spec, Shifted):
        return measure_for_kernel(spec.base).tilted(spec.epsilon)
    if isinstance(spec, FromMeasure):
        return spec.measure
    raise ConfigurationError(f"no catalog Bernstein measure for {spec!r}")


def measure_to_dict(m: BernsteinMeasure) -> dict:
    return {
        "k_infinity": m.k_infinity,
        "atoms": [list(a) for a in m.atoms],
        "densities": [_density_to_dict(d) for d in m.densities],
    }


def measure_from_dict(d: dict) -> BernsteinMeasure:
    """Parse the catalog form ``{k_infinity, atoms: [[x, c], ...], densities: [...]}``."""
    try:
        kinf = float(d.get("k_infinity", 0.0))
        atoms = tuple((float(x), float(c)) for x, c in d.get("atoms", ()))
        dens = tuple(_density_from_dict(x) for x in d.get("densities", ()))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"bad measure descriptor: {exc}") from None
    hint = None
    if not dens:
        hint = ExpSum(kinf, tuple((c, x) for x, c in atoms)) if (atoms or kinf > 0) else None
    elif len(dens) == 1 and not atoms and kinf == 0:
        one = dens[0]
        if isinstance(one, PowerDensity) and one.scale == PowerDensity(one.alpha).scale:
            return rl_measure(one.alpha - 0.5, one.shift)
        if isinstance(one, LogKernelDensity):
            return log_kernel_measure()
    return BernsteinMeasure(kinf, atoms, dens, kernel_hint=hint)


def eta_star(measure: BernsteinMeasure) -> float:
    """``inf{eta : integral (1+x)^(-eta) mu(dx) < inf}`` (``-inf`` for finite tails)."""
    return measure.eta_star


# ---------------------------------------------------------------------------
# Hilbert-space elements


@dataclass(frozen=True)
class HilbertElement:
    """Element ``y`` of ``H_eta``: ``y(0)`` and a function on ``(0, inf)``.

    ``time`` accumulates semigroup shifts so that ``S(t) S(s) y`` and
    ``S(t + s) y`` evaluate identically.  ``kind`` tags the constructors
    that :func:`functional_kernel` recognises.
    """

    value_at_zero: float
    func: Callable = field(compare=False)
    eta: float
    time: float = 0.0
    kind: str = "custom"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-self.time * x) * np.asarray(self.func(x), dtype=float)


def weight_element(eta: float) -> HilbertElement:
    """``w_eta(x) = (1 + x)^(-eta)``, the Riesz representer of ``Xi``."""
    return HilbertElement(1.0, lambda x: (1.0 + x) ** (-eta), eta, kind="weight")


def kernel_element(measure: BernsteinMeasure, eta: float) -> HilbertElement:
    """``xi_K``: one on ``(0, inf)`` and ``K(inf)`` at the origin."""
    return HilbertElement(measure.k_infinity, lambda x: np.ones_like(x), eta, kind="kernel")


def constant_element(x0: float, eta: float = 0.0) -> HilbertElement:
    """Element whose projected orbit is the constant curve ``x0``."""
    return HilbertElement(float(x0), lambda x: np.zeros_like(x), eta, kind="constant")


def semigroup_apply(t: float, y: HilbertElement) -> HilbertElement:
    """``S(t) y = exp(-t x) y``."""
    if t < 0:
        raise DomainError("semigroup time must be nonnegative")
    if t == 0:
        return y
    return replace(y, time=y.time + t)


def _scale_for(*ys):
    t = max((y.time for y in ys), default=0.0)
    return 1.0 / t if t > 0 else 1.0


def xi_projection(y: HilbertElement, measure: BernsteinMeasure) -> float:
    """``Xi y = y(0) + integral y dmu``.

    Requires ``y.eta > eta_star``, or ``y = S(t) y0`` with ``t > 0``, which
    lies in every ``H_eta`` because of the factor ``exp(-t x)``.
    """
    es = measure.eta_star
    if not (y.eta > es or y.time > 0):
        raise DomainError(f"Xi is unbounded on H_eta for eta={y.eta} <= eta_star={es}")
    return y.value_at_zero + measure.integrate(y, scale=_scale_for(y))


def inner_product_eta(y: HilbertElement, y2: HilbertElement, eta: float, measure: BernsteinMeasure) -> float:
    """``y(0) y2(0) + integral y y2 (1+x)^eta mu(dx)``."""
    f = lambda x: y(x) * y2(x) * (1.0 + np.asarray(x)) ** eta
    try:
        val = y.value_at_zero * y2.value_at_zero + measure.integrate(f, scale=_scale_for(y, y2))
    except Exception as exc:  # quadrature blow-up means the integral diverges
        raise DomainError(f"inner product diverges: {exc}") from None
    if not np.isfinite(val):
        raise DomainError("inner product diverges")
    return val


def hilbert_norm(y: HilbertElement, eta: float, measure: BernsteinMeasure) -> float:
    return math.sqrt(inner_product_eta(y, y, eta, measure))


def kappa(delta: float) -> float:
    """``max{1, 2^(-delta/2) delta^(delta/2)}``."""
    if delta <= 0:
        return 1.0
    return max(1.0, 2.0 ** (-delta / 2) * delta ** (delta / 2))


@dataclass
class SemigroupBoundReport:
    times: np.ndarray
    ratios: np.ndarray  # max over elements of ||S(t)y||_eta / ||y||_eta'
    bounds: np.ndarray  # C_T kappa(delta) t^(-delta/2)
    ok: bool


def semigroup_bound_check(measure, elements, eta, eta_prime, times, T=1.0) -> SemigroupBoundReport:
    """Empirical check of ``||S(t)||_(H_eta' -> H_eta) <= C_T kappa(eta - eta') t^(-(eta - eta')/2)``.

    Uses ``C_T = exp(T) max(1, T^(delta/2))``, which follows from maximising
    ``(1+x)^delta exp(-2 t x)`` over ``x >= 0``.
    """
    delta = eta - eta_prime
    times = np.asarray(times, dtype=float)
    if np.any(times <= 0) or np.any(times > T):
        raise DomainError("times must lie in (0, T]")
    c_t = math.exp(T) * max(1.0, T ** (max(delta, 0) / 2))
    ratios = np.zeros_like(times)
    for k, t in enumerate(times):
        for y in elements:
            den = hilbert_norm(y, eta_prime, measure)
            if den == 0:
                continue
            ratios[k] = max(ratios[k], hilbert_norm(semigroup_apply(t, y), eta, measure) / den)
    bounds = c_t * kappa(delta) * times ** (-max(delta, 0) / 2)
    return SemigroupBoundReport(times, ratios, bounds, bool(np.all(ratios <= bounds * (1 + 1e-9))))


# ---------------------------------------------------------------------------
# quadrature lift


@dataclass(frozen=True)
class QuadratureLift:
    """``K_N(t) = sum_i w_i exp(-x_i t)`` approximating ``target_kernel``."""

    nodes: np.ndarray
    weights: np.ndarray
    target_kernel: Optional[KernelSpec]
    l2_error: float
    t_min: float
    T: float

    def kernel(self, t):
        t = np.asarray(t, dtype=float)
        return np.sum(self.weights * np.exp(-np.multiply.outer(t, self.nodes)), axis=-1)

    def to_dict(self):
        return {
            "nodes": self.nodes.tolist(),
            "weights": self.weights.tolist(),
            "l2_error": self.l2_error,
            "t_min": self.t_min,
            "T": self.T,
        }


def _bin_density(d, n_local, x_lo, x_hi, t_min):
    """Nodes/weights for one density: head lump, geometric bins, tail lump."""
    lo = d.lo
    start = max(x_lo, lo)
    nodes, weights = [], []
    n_bins = n_local - 1 - (1 if start > lo else 0)
    if start > lo:
        m = d.mass(lo, start)
        if m > 0:
            nodes.append(d.first_moment(lo, start) / m)
            weights.append(m)
    if x_hi > start and n_bins > 0:
        edges = np.geomspace(start, x_hi, n_bins + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            m = d.mass(a, b)
            if m > 0:
                nodes.append(d.first_moment(a, b) / m)
                weights.append(m)
    tail0 = max(x_hi, lo)
    t1 = d.tail_laplace(t_min, tail0)
    t2 = d.tail_laplace(2 * t_min, tail0)
    if t1 > 0 and t2 > 0:
        x_tail = -math.log(t2 / t1) / t_min
        nodes.append(x_tail)
        weights.append(t1 * math.exp(x_tail * t_min))
    return nodes, weights


def discretize_measure(
    measure: BernsteinMeasure,
    n_nodes: int,
    t_min: float,
    T: float,
    max_error: Optional[float] = None,
) -> QuadratureLift:
    """N-node exponential-sum approximation of the kernel.

    Atoms are copied verbatim and ``K(inf)`` becomes a node at 0.  Each
    density is split into a head lump on ``(lo, 1/(10T)]``, geometric bins up
    to ``10/t_min`` (weights = bin masses, nodes = bin centroids) and a tail
    node fitted to the tail's Laplace transform at ``t_min`` and
    ``2 t_min``.  ``l2_error`` is ``||K - K_N||`` on ``[t_min, T]``.
    """
    if n_nodes < 1:
        raise ConfigurationError("n_nodes must be positive")
    if not (0 < t_min < T):
        raise ConfigurationError("need 0 < t_min < T")
    nodes, weights = [], []
    if measure.k_infinity > 0:
        nodes.append(0.0)
        weights.append(measure.k_infinity)
    for x, c in measure.atoms:
        nodes.append(x)
        weights.append(c)
    budget = n_nodes - len(nodes)
    nd = len(measure.densities)
    if nd:
        if budget < 3 * nd:
            raise ConfigurationError(
                f"n_nodes={n_nodes} leaves {budget} nodes for {nd} densities (need >= 3 each)"
            )
        x_lo, x_hi = 1.0 / (10.0 * T), 10.0 / t_min
        share = [budget // nd + (1 if i < budget % nd else 0) for i in range(nd)]
        for d, m in zip(measure.densities, share):
            nn, ww = _bin_density(d, m, x_lo, x_hi, t_min)
            nodes += nn
            weights += ww
    if not nodes:
        raise ConfigurationError("measure is zero")
    nodes = np.asarray(nodes, dtype=float)
    weights = np.asarray(weights, dtype=float)
    target = measure.kernel()
    if nd:
        def sq_err(t):
            return (float(eval_kernel(target, t)) - float(np.sum(weights * np.exp(-nodes * t)))) ** 2

        err = math.sqrt(_quad.quad_log(sq_err, t_min, T, epsrel=1e-10, what="lift error"))
    else:
        err = 0.0
    if max_error is not None and err > max_error:
        raise ApproximationError(f"lift L2 error {err:.3e} above {max_error:.3e}", {"l2_error": err})
    return QuadratureLift(nodes, weights, target, err, t_min, T)


@dataclass
class LiftState:
    """Lift components at ``time``; ``components`` has shape ``(n_paths, n_nodes)``."""

    time: float
    components: np.ndarray


@dataclass
class LiftRun:
    projected: np.ndarray  # (n_paths, n_steps + 1)
    final: LiftState
    states: Optional[np.ndarray] = None  # (n_paths, n_steps + 1, n_nodes) if kept


def _initial_curve(quad, xi_g, times, measure):
    if xi_g is None:
        return np.zeros_like(times)
    if xi_g.kind == "constant":
        return np.full_like(times, xi_g.value_at_zero)
    if measure is not None:
        return np.array([xi_projection(semigroup_apply(t, xi_g), measure) for t in times])
    pos = quad.nodes > 0
    vals = np.asarray(xi_g(quad.nodes[pos]), dtype=float)
    ex = np.exp(-np.multiply.outer(times, quad.nodes[pos]))
    return xi_g.value_at_zero + ex @ (quad.weights[pos] * vals)


def simulate_lift(
    quad: QuadratureLift,
    drift,
    diffusion,
    xi_g: Optional[HilbertElement],
    grid,
    noise: np.ndarray,
    *,
    measure: Optional[BernsteinMeasure] = None,
    rule: str = "left",
    keep_states: bool = False,
) -> LiftRun:
    """Exponential-integrator simulation of the finite-rank lift.

    Each node evolves as
    ``U_i <- exp(-x_i dt) U_i + phi_i b(X) + c_i sigma(X) dB`` with
    ``phi_i = (1 - exp(-x_i dt))/x_i`` and ``X = g + sum_i w_i U_i``.
    ``rule="left"`` uses ``c_i = 1`` (left-point kernel value, pathwise equal
    to the ``"left"`` convolution rule); ``rule="mean"`` uses
    ``c_i = phi_i / dt`` (cell average, equal to the ``"mean"`` rule).

    Parameters
    ----------
    drift, diffusion : callable
        Vectorised coefficient functions.
    xi_g : HilbertElement or None
        Initial curve ``g = Xi S(.) xi_g``; ``None`` means ``g = 0``.
    grid : SimGrid
    noise : ndarray, shape (n_paths, n_steps)
        Brownian increments.
    measure : BernsteinMeasure, optional
        Exact measure for ``g``; otherwise ``g`` is projected on the nodes.
    """
    noise = np.asarray(noise, dtype=float)
    if noise.ndim != 2 or noise.shape[1] != grid.n_steps:
        raise DomainError(f"noise shape {noise.shape} does not match {grid.n_steps} steps")
    if rule not in ("left", "mean"):
        raise ConfigurationError(f"unknown lift rule {rule!r}")
    dt = grid.dt
    x = quad.nodes
    w = quad.weights
    decay = np.exp(-x * dt)
    phi = np.where(x > 0, -np.expm1(-x * dt) / np.where(x > 0, x, 1.0), dt)
    coef = np.ones_like(x) if rule == "left" else phi / dt
    times = np.arange(grid.n_steps + 1) * dt
    g = _initial_curve(quad, xi_g, times, measure)
    n_paths = noise.shape[0]
    U = np.zeros((n_paths, x.size))
    out = np.empty((n_paths, grid.n_steps + 1))
    states = np.empty((n_paths, grid.n_steps + 1, x.size)) if keep_states else None
    out[:, 0] = g[0]
    if keep_states:
        states[:, 0] = U
    for k in range(grid.n_steps):
        X = out[:, k]
        b = np.asarray(drift(X), dtype=float)
        s = np.asarray(diffusion(X), dtype=float) * noise[:, k]
        U = U * decay + np.multiply.outer(b, phi) + np.multiply.outer(s, coef)
        out[:, k + 1] = g[k + 1] + U @ w
        if keep_states:
            states[:, k + 1] = U
    return LiftRun(out, LiftState(grid.T, U), states)


# ---------------------------------------------------------------------------
# kernel bounds from the measure


@dataclass
class LiftBoundReport:
    """Both sides of the lower, upper and increment inequalities on an h-grid."""

    h: np.ndarray
    l2: np.ndarray
    mass: np.ndarray
    increment: np.ndarray
    eta_star: float
    eps: float
    order: float
    lower_const: float
    explicit_lower_ok: bool
    upper_const: float
    increment_const: float
    fitted_upper_order: float
    fitted_increment_order: float
    mass_slope: float
    eps_zero_admissible: bool
    violations: list

    @property
    def holds(self) -> bool:
        return not self.violations

    def to_dict(self):
        return {
            "h": self.h.tolist(),
            "l2": self.l2.tolist(),
            "mass": self.mass.tolist(),
            "increment": self.increment.tolist(),
            "eta_star": None if np.isneginf(self.eta_star) else self.eta_star,
            "eps": self.eps,
            "order": self.order,
            "lower_const": self.lower_const,
            "explicit_lower_ok": self.explicit_lower_ok,
            "upper_const": self.upper_const,
            "increment_const": self.increment_const,
            "fitted_upper_order": self.fitted_upper_order,
            "fitted_increment_order": self.fitted_increment_order,
            "mass_slope": self.mass_slope,
            "eps_zero_admissible": self.eps_zero_admissible,
            "violations": self.violations,
        }


def _eps_zero_admissible(measure):
    es = measure.eta_star
    if np.isneginf(es):
        return True
    try:
        v = measure.integrate(lambda x: (1.0 + np.asarray(x)) ** (-es))
    except Exception:
        return False
    return bool(np.isfinite(v))


def _slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def verify_lift_kernel_bounds(measure: BernsteinMeasure, h_grid=None, T: float = 1.0, eps: float = 0.0) -> LiftBoundReport:
    """Evaluate the three L2 bounds of a completely monotone kernel.

    Lower: ``C (mu((0,1/h]) v 1)^2 h <= integral_0^h K^2``, also checked with
    the explicit constant ``(1 - 1/e)^2`` against ``mu((0,1/h])^2 h``.
    Upper and increment: ``<= C h^p`` with ``p = 1`` if ``eta_star < 0`` and
    ``p = 1 - 2 eta_star - eps`` otherwise.  Constants are the extreme ratios
    over the grid; violations are listed, never raised.
    """
    es = measure.eta_star
    if not es < 0.5:
        raise DomainError(f"bounds need eta_star < 1/2, got {es}")
    h = np.asarray(h_grid if h_grid is not None else 2.0 ** -np.arange(1, 13), dtype=float)
    if np.any(h <= 0) or np.any(h > T):
        raise DomainError("h must lie in (0, T]")
    K = measure.kernel()
    l2 = np.array([l2_norm_sq(K, float(x)) for x in h])
    mass = np.array([measure.mass(0.0, 1.0 / x) for x in h])
    incr = np.array([increment_l2(K, float(x), T) for x in h])
    p = 1.0 if es < 0 else 1.0 - 2.0 * es - eps
    lower_ratio = l2 / (np.maximum(mass, 1.0) ** 2 * h)
    explicit_ok = bool(np.all(l2 >= (1 - math.exp(-1)) ** 2 * h * mass**2 * (1 - 1e-12)))
    upper_ratio = l2 / h**p
    incr_ratio = incr / h**p
    violations = []
    if not np.all(np.isfinite(lower_ratio)) or lower_ratio.min() <= 0:
        violations.append("lower constant not positive")
    if not explicit_ok:
        violations.append("explicit lower bound (1-1/e)^2 h mu^2 violated")
    if not np.all(np.isfinite(upper_ratio)) or upper_ratio.max() <= 0:
        violations.append("upper constant not finite")
    if not np.all(np.isfinite(incr_ratio)):
        violations.append("increment constant not finite")
    pos = incr > 0
    return LiftBoundReport(
        h=h,
        l2=l2,
        mass=mass,
        increment=incr,
        eta_star=es,
        eps=eps,
        order=p,
        lower_const=float(lower_ratio.min()),
        explicit_lower_ok=explicit_ok,
        upper_const=float(upper_ratio.max()),
        increment_const=float(incr_ratio.max()) if incr.size else 0.0,
        fitted_upper_order=_slope(h, l2),
        fitted_increment_order=_slope(h[pos], incr[pos]) if pos.sum() >= 2 else float("nan"),
        mass_slope=_slope(h, mass) if np.all(mass > 0) else float("nan"),
        eps_zero_admissible=_eps_zero_admissible(measure),
        violations=violations,
    )


# ---------------------------------------------------------------------------
# functionals of the lift


@dataclass(frozen=True)
class FunctionalKernel:
    """Kernel ``K_y(t) = <S(t) xi_K, y>_eta`` with its density-bound metadata.

    ``rho`` bounds the growth of ``d nu/d mu`` (``None`` if unverifiable);
    ``eta_star`` is the tail index of the induced measure.
    """

    kernel: KernelSpec
    measure: BernsteinMeasure
    rho: Optional[float]
    eta_star: float
    label: str = ""

    @property
    def density_bound_known(self) -> bool:
        return self.rho is not None


def _estimate_rho(ratio_fn):
    xs = np.logspace(0, 8, 33)
    r = np.abs(np.asarray(ratio_fn(xs), dtype=float))
    if np.any(~np.isfinite(r)):
        return None
    if np.all(r[-8:] == 0) or (r[-1] > 0 and r[0] > 0 and math.log(r[-1] / r[0]) / math.log(1e8) < -50):
        return -np.inf
    if np.any(r <= 0):
        return None
    lx, lr = np.log1p(xs), np.log(r)
    s_end = np.polyfit(lx[-9:], lr[-9:], 1)[0]
    if s_end < -50:
        return -np.inf
    s_mid = np.polyfit(lx[-17:-8], lr[-17:-8], 1)[0]
    if abs(s_end - s_mid) > 0.05 and s_end > s_mid:
        return None
    return float(s_end)


def functional_kernel(y: HilbertElement, measure: BernsteinMeasure, eta: float) -> FunctionalKernel:
    """Completely monotone kernel induced by a functional ``y`` of the lift.

    The induced measure is ``y(x) (1+x)^eta mu(dx)`` with ``K(inf) y(0)`` at
    infinity.  ``y = w_eta`` returns the base kernel and ``S(eps) w_eta``
    returns ``K(. + eps)``.  ``rho`` is clamped below at ``-max(eta_star, 0)``,
    which leaves every corridor condition unchanged.
    """
    es = measure.eta_star
    floor = -max(es, 0.0) if np.isfinite(es) else 0.0
    if y.kind == "weight" and y.eta == eta:
        base = measure if y.time == 0 else measure.tilted(y.time)
        if y.time == 0:
            return FunctionalKernel(base.kernel(), base, 0.0, es, "base")
        return FunctionalKernel(base.kernel(), base, floor, base.eta_star, f"shift({y.time:g})")

    def ratio(x):
        x = np.asarray(x, dtype=float)
        return y(x) * (1.0 + x) ** eta

    rho_hat = _estimate_rho(ratio)
    kinf = measure.k_infinity * y.value_at_zero
    atoms = tuple((x, c * float(ratio(x))) for x, c in measure.atoms if c * float(ratio(x)) > 0)
    dens = tuple(WeightedDensity(d, ratio, rho_hat, "functional") for d in measure.densities)
    new = BernsteinMeasure(kinf, atoms, dens)
    if rho_hat is None:
        rho, es_j = None, np.nan
    else:
        rho = max(rho_hat, floor)
        es_j = -np.inf if (np.isneginf(rho_hat) or not dens) else max(d.eta_star for d in dens)
    return FunctionalKernel(FromMeasure(new), new, rho, es_j, y.kind)
