"""Monte Carlo simulation of stochastic Volterra equations.

The reference scheme is a left-point Volterra-Euler recursion

    X_{k+1} = g(t_{k+1}) + sum_{j<=k} wb[k-j] b(X_j) + ws[k-j] sigma(X_j) dB_j

with drift weights ``wb[k] = integral_{k dt}^{(k+1) dt} K`` and diffusion
weights chosen by ``rule``:

* ``"variance"`` (default): ``ws[k] = sqrt(integral_cell K^2 / dt)``, so a
  constant diffusion gives exactly the Gaussian law with variance
  ``integral_0^t K^2`` at grid times;
* ``"mean"``: cell average ``wb[k] / dt``;
* ``"left"``: ``K(k dt)`` (bounded kernels only).

The direct O(n^2) sum runs in a numba kernel, one path at a time, so a path
never depends on how paths are split across threads.  Brownian increments
come from Philox streams keyed by ``(seed, block)`` with a fixed block size,
which makes path ``i`` a function of ``(seed, i, n_steps)`` only.
"""

from __future__ import annotations

import json
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numba
import numpy as np
from scipy import signal

from .bernstein_lift import BernsteinMeasure, HilbertElement, semigroup_apply, xi_projection
from .errors import ConfigurationError, DomainError, SimulationError
from .kernels import (
    KernelSpec,
    analyze_kernel,
    eval_kernel,
    kernel_integral,
    kernel_sq_integral,
    limit_covariance,
)

__all__ = [
    "Constant",
    "Affine",
    "PowerHolder",
    "SqrtPos",
    "coefficient_from_dict",
    "coefficient_to_dict",
    "InitialCurve",
    "SVIEModel",
    "SimGrid",
    "PathEnsemble",
    "brownian_increments",
    "convolution_weights",
    "euler_volterra",
    "fft_convolution",
    "exact_gaussian_limit",
    "z_moment_diagnostic",
    "moment_bound_check",
    "stochastic_convolution",
    "write_ensemble_binary",
    "read_ensemble_binary",
    "write_ensemble_csv",
    "RNG_BLOCK",
]

#: paths per RNG stream; part of the reproducibility contract
RNG_BLOCK = 1024


# ---------------------------------------------------------------------------
# coefficients


@dataclass(frozen=True)
class Constant:
    c: float
    holder = 1.0
    code = 0

    @property
    def params(self):
        return (float(self.c), 0.0)

    def __call__(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.c)


@dataclass(frozen=True)
class Affine:
    """``kappa (theta - x)``."""

    kappa: float
    theta: float
    holder = 1.0
    code = 1

    @property
    def params(self):
        return (float(self.kappa), float(self.theta))

    def __call__(self, x):
        return self.kappa * (self.theta - np.asarray(x, dtype=float))


@dataclass(frozen=True)
class PowerHolder:
    """``c |x|^chi``."""

    c: float
    chi: float
    code = 2

    def __post_init__(self):
        if not (0 < self.chi <= 1):
            raise ConfigurationError("PowerHolder needs chi in (0, 1]")

    @property
    def holder(self):
        return self.chi

    @property
    def params(self):
        return (float(self.c), float(self.chi))

    def __call__(self, x):
        return self.c * np.abs(np.asarray(x, dtype=float)) ** self.chi


@dataclass(frozen=True)
class SqrtPos:
    """``xi sqrt(max(x, 0))``."""

    xi: float
    holder = 0.5
    code = 3

    @property
    def params(self):
        return (float(self.xi), 0.0)

    def __call__(self, x):
        return self.xi * np.sqrt(np.maximum(np.asarray(x, dtype=float), 0.0))


_COEF = {"constant": Constant, "affine": Affine, "power-holder": PowerHolder, "sqrt-pos": SqrtPos}


def coefficient_to_dict(c) -> dict:
    name = {v: k for k, v in _COEF.items()}[type(c)]
    d = {"kind": name}
    d.update({k: getattr(c, k) for k in c.__dataclass_fields__})
    return d


def coefficient_from_dict(d) -> object:
    if isinstance(d, (int, float)):
        return Constant(float(d))
    try:
        cls = _COEF[str(d["kind"]).lower()]
        args = {k: float(v) for k, v in d.items() if k != "kind"}
        return cls(**args)
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"bad coefficient descriptor {d!r}: {exc}") from None


# ---------------------------------------------------------------------------
# model and grid


@dataclass(frozen=True)
class InitialCurve:
    """``g(t) = Xi S(t) xi_g`` for a Hilbert element and its measure."""

    element: HilbertElement
    measure: BernsteinMeasure

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.array([xi_projection(semigroup_apply(s, self.element), self.measure) for s in t])


@dataclass(frozen=True)
class SVIEModel:
    """Kernel, drift, diffusion and initial value (constant or curve).

    ``chi_b``/``chi_sigma`` default to the coefficients' Hoelder exponents.
    """

    kernel: KernelSpec
    drift: object
    diffusion: object
    initial: Union[float, InitialCurve] = 0.0
    chi_b: Optional[float] = None
    chi_sigma: Optional[float] = None

    def __post_init__(self):
        if self.chi_b is None:
            object.__setattr__(self, "chi_b", float(self.drift.holder))
        if self.chi_sigma is None:
            object.__setattr__(self, "chi_sigma", float(self.diffusion.holder))
        for name in ("chi_b", "chi_sigma"):
            v = getattr(self, name)
            if not (0 < v <= 1):
                raise ConfigurationError(f"{name}={v} outside (0, 1]")

    @property
    def constant_initial(self) -> bool:
        return not isinstance(self.initial, InitialCurve)

    @property
    def x0(self) -> float:
        if not self.constant_initial:
            return float(self.initial(0.0)[0])
        return float(self.initial)

    def g(self, t):
        t = np.asarray(t, dtype=float)
        if self.constant_initial:
            return np.full(t.shape, float(self.initial))
        return self.initial(t).reshape(t.shape)


@dataclass(frozen=True)
class SimGrid:
    T: float
    n_steps: int

    def __post_init__(self):
        if not (self.T > 0 and self.n_steps >= 1):
            raise ConfigurationError("SimGrid needs T > 0 and n_steps >= 1")

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def index_of(self, t, tol=1e-9) -> int:
        k = t / self.dt
        kr = int(round(k))
        if abs(k - kr) > tol * max(1.0, k) or not 0 <= kr <= self.n_steps:
            raise DomainError(f"time {t} is not a grid point of {self}")
        return kr


@dataclass
class PathEnsemble:
    """Simulated paths; rows are retained paths, columns are grid times.

    ``path_index`` maps rows to RNG path indices (flagged paths removed).
    """

    values: np.ndarray
    grid: SimGrid
    seed: int
    scheme: str
    n_flagged: int = 0
    path_index: Optional[np.ndarray] = None
    negative_fraction: Optional[float] = None
    meta: dict = field(default_factory=dict)

    @property
    def n_paths(self):
        return self.values.shape[0]


# ---------------------------------------------------------------------------
# noise


def _block_rng(seed: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(int(block),))
    return np.random.Generator(np.random.Philox(ss))


def brownian_increments(seed: int, n_steps: int, dt: float, start: int, stop: int) -> np.ndarray:
    """Increments for paths ``start..stop-1``; shape ``(stop - start, n_steps)``."""
    if stop <= start:
        return np.empty((0, n_steps))
    out = np.empty((stop - start, n_steps))
    sq = math.sqrt(dt)
    b0, b1 = start // RNG_BLOCK, (stop - 1) // RNG_BLOCK
    for b in range(b0, b1 + 1):
        z = _block_rng(seed, b).standard_normal((RNG_BLOCK, n_steps))
        lo, hi = max(start, b * RNG_BLOCK), min(stop, (b + 1) * RNG_BLOCK)
        out[lo - start : hi - start] = z[lo - b * RNG_BLOCK : hi - b * RNG_BLOCK] * sq
    return out


def _block_normals(seed: int, n_paths: int, dim: int) -> np.ndarray:
    return brownian_increments(seed, dim, 1.0, 0, n_paths)


# ---------------------------------------------------------------------------
# weights

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


def _cell_integrals(spec, n, dt, power, closed):
    edges = np.arange(n + 1) * dt
    if closed is not None:
        return np.diff(closed(edges))
    near = min(n, 16)
    out = np.empty(n)
    f = kernel_integral if power == 1 else kernel_sq_integral
    for k in range(near):
        out[k] = f(spec, k * dt, (k + 1) * dt)
    if n > near:
        a = edges[near:-1]
        mid = a + dt / 2
        pts = mid[:, None] + (dt / 2) * _GL_X[None, :]
        vals = spec(pts) ** power
        out[near:] = (dt / 2) * vals @ _GL_W
    return out


def convolution_weights(kernel: KernelSpec, grid: SimGrid, rule: str = "variance"):
    """Drift and diffusion weights per lag ``k = 0 .. n_steps - 1``.

    Returns
    -------
    wb, ws : ndarray
        ``wb[k] = integral_{k dt}^{(k+1) dt} K``; ``ws`` as selected by ``rule``.
    """
    n, dt = grid.n_steps, grid.dt
    c1 = kernel._int1 if kernel._int1(dt) is not None else None
    wb = _cell_integrals(kernel, n, dt, 1, c1)
    if rule == "variance":
        c2 = kernel._int2 if kernel._int2(dt) is not None else None
        ws = np.sqrt(np.maximum(_cell_integrals(kernel, n, dt, 2, c2), 0.0) / dt)
    elif rule == "mean":
        ws = wb / dt
    elif rule == "left":
        if not kernel.bounded:
            raise ConfigurationError("left-point diffusion weights need a bounded kernel")
        ws = np.asarray(eval_kernel(kernel, np.arange(n) * dt), dtype=float)
    else:
        raise ConfigurationError(f"unknown weight rule {rule!r}")
    return wb, ws


# ---------------------------------------------------------------------------
# direct convolution kernel


@numba.njit(cache=True, nogil=True)
def _coef(code, p1, p2, x):
    if code == 0:
        return p1
    if code == 1:
        return p1 * (p2 - x)
    if code == 2:
        return p1 * abs(x) ** p2
    return p1 * math.sqrt(x) if x > 0.0 else 0.0


@numba.njit(cache=True, nogil=True)
def _direct_paths(g, wb, ws, noise, bc, b1, b2, sc, s1, s2, out):
    n_paths, n = noise.shape
    bv = np.empty(n)
    sv = np.empty(n)
    for p in range(n_paths):
        x = g[0]
        out[p, 0] = x
        for k in range(n):
            bv[k] = _coef(bc, b1, b2, x)
            sv[k] = _coef(sc, s1, s2, x) * noise[p, k]
            acc = 0.0
            for j in range(k + 1):
                acc += wb[k - j] * bv[j] + ws[k - j] * sv[j]
            x = g[k + 1] + acc
            out[p, k + 1] = x
            if not math.isfinite(x):
                for m in range(k + 2, n + 1):
                    out[p, m] = np.nan
                break


def _coef_args(c):
    if not hasattr(c, "code"):
        raise ConfigurationError(f"unsupported coefficient {c!r}")
    p1, p2 = c.params
    return int(c.code), p1, p2


def _finalize(values, grid, seed, scheme, index, meta=None):
    bad = ~np.all(np.isfinite(values), axis=1)
    n_bad = int(bad.sum())
    if n_bad > 0.01 * values.shape[0]:
        raise SimulationError(
            f"{n_bad} of {values.shape[0]} paths non-finite (limit 1%)", {"n_flagged": n_bad}
        )
    keep = ~bad
    vals = values[keep] if n_bad else values
    neg = float(np.mean(vals[:, 1:] < 0)) if vals.size else 0.0
    return PathEnsemble(vals, grid, seed, scheme, n_bad, index[keep], neg, meta or {})


def _chunks(n_paths, n_workers):
    # chunk boundaries on RNG blocks so each chunk draws its own streams
    edges = list(range(0, n_paths, RNG_BLOCK)) + [n_paths]
    return list(zip(edges[:-1], edges[1:]))


def euler_volterra(
    model: SVIEModel,
    grid: SimGrid,
    n_paths: int,
    seed: int,
    *,
    rule: str = "variance",
    noise: Optional[np.ndarray] = None,
    n_workers: int = 1,
    weights=None,
) -> PathEnsemble:
    """Reference direct-convolution scheme.

    Parameters
    ----------
    model : SVIEModel
    grid : SimGrid
    n_paths : int
    seed : int
        Seed of the per-block Philox streams (ignored if ``noise`` is given).
    rule : {"variance", "mean", "left"}
        Diffusion weight rule, see the module docstring.
    noise : ndarray, optional
        Brownian increments of shape ``(n_paths, n_steps)`` to reuse.
    n_workers : int
        Threads over path chunks; results do not depend on it.
    weights : tuple, optional
        Precomputed ``(wb, ws)``.
    """
    if n_paths < 1:
        raise ConfigurationError("n_paths must be positive")
    wb, ws = weights if weights is not None else convolution_weights(model.kernel, grid, rule)
    g = model.g(grid.times)
    bargs = _coef_args(model.drift)
    sargs = _coef_args(model.diffusion)
    out = np.empty((n_paths, grid.n_steps + 1))
    if noise is not None:
        noise = np.asarray(noise, dtype=float)
        if noise.shape != (n_paths, grid.n_steps):
            raise DomainError(f"noise shape {noise.shape} != {(n_paths, grid.n_steps)}")

    def run(chunk):
        lo, hi = chunk
        dB = noise[lo:hi] if noise is not None else brownian_increments(seed, grid.n_steps, grid.dt, lo, hi)
        _direct_paths(g, wb, ws, np.ascontiguousarray(dB), *bargs, *sargs, out[lo:hi])

    chunks = _chunks(n_paths, n_workers)
    if n_workers > 1:
        with ThreadPoolExecutor(n_workers) as ex:
            list(ex.map(run, chunks))
    else:
        for c in chunks:
            run(c)
    return _finalize(out, grid, seed, "direct-conv", np.arange(n_paths), {"rule": rule})


# ---------------------------------------------------------------------------
# FFT (online / relaxed) convolution


def _relaxed_solve(g, wb, ws, noise, drift, diffusion, leaf=32):
    P, n = noise.shape
    X = np.empty((P, n + 1))
    acc = np.zeros((P, n + 1))
    B = np.zeros((P, n))
    S = np.zeros((P, n))

    def solve(lo, hi):
        if hi - lo <= leaf:
            for k in range(lo, hi):
                X[:, k] = g[k] + acc[:, k]
                if k < n:
                    B[:, k] = drift(X[:, k])
                    S[:, k] = diffusion(X[:, k]) * noise[:, k]
                    m = hi - 1 - k
                    if m > 0:
                        acc[:, k + 1 : hi] += B[:, k : k + 1] * wb[:m] + S[:, k : k + 1] * ws[:m]
            return
        mid = (lo + hi) // 2
        solve(lo, mid)
        jhi = min(mid, n)
        if jhi > lo:
            m2 = hi - lo - 1
            cb = signal.fftconvolve(B[:, lo:jhi], wb[None, :m2], axes=1)
            cs = signal.fftconvolve(S[:, lo:jhi], ws[None, :m2], axes=1)
            q0, q1 = mid - lo - 1, hi - lo - 1
            acc[:, mid:hi] += cb[:, q0:q1] + cs[:, q0:q1]
        solve(mid, hi)

    solve(0, n + 1)
    return X


def fft_convolution(
    model: SVIEModel,
    grid: SimGrid,
    n_paths: int,
    seed: int,
    *,
    rule: str = "variance",
    noise: Optional[np.ndarray] = None,
    leaf: int = 32,
) -> PathEnsemble:
    """Same recursion as :func:`euler_volterra`, evaluated by block FFT convolution.

    Divide and conquer over time: the left half is solved first, its
    contribution to the right half is added with one FFT convolution, then
    the right half is solved.  Cost ``O(n log^2 n)`` per path.
    """
    wb, ws = convolution_weights(model.kernel, grid, rule)
    g = model.g(grid.times)
    out = np.empty((n_paths, grid.n_steps + 1))
    with np.errstate(invalid="ignore", over="ignore"):
        for lo, hi in _chunks(n_paths, 1):
            dB = noise[lo:hi] if noise is not None else brownian_increments(seed, grid.n_steps, grid.dt, lo, hi)
            out[lo:hi] = _relaxed_solve(g, wb, ws, dB, model.drift, model.diffusion, leaf)
    return _finalize(out, grid, seed, "fft-conv", np.arange(n_paths), {"rule": rule})


def stochastic_convolution(ws: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """``sum_{j<k} ws[k-1-j] dB_j`` for ``k = 0..n`` (first column zero)."""
    P, n = noise.shape
    c = signal.fftconvolve(noise, ws[None, :], axes=1)[:, :n]
    return np.concatenate([np.zeros((P, 1)), c], axis=1)


# ---------------------------------------------------------------------------
# Gaussian limit


def exact_gaussian_limit(kbar, sigma_xbar: float, times, n_paths: int, seed: int) -> np.ndarray:
    """Samples of ``N(0, Sigma)`` with ``Sigma = limit_covariance(kbar, sigma_xbar, times)``."""
    from .errors import CovarianceError

    cov = limit_covariance(kbar, sigma_xbar, times)
    m = cov.shape[0]
    if sigma_xbar == 0 or not np.any(cov):
        return np.zeros((n_paths, m))
    L = None
    for jitter in (0.0, 1e-14, 1e-12):
        try:
            L = np.linalg.cholesky(cov + jitter * np.eye(m))
            break
        except np.linalg.LinAlgError:
            continue
    if L is None:
        raise CovarianceError("Cholesky failed after jitter", {"cov": cov.tolist()})
    z = _block_normals(seed, n_paths, m)
    return z @ L.T


# ---------------------------------------------------------------------------
# moment diagnostics


@dataclass
class SlopeReport:
    t: np.ndarray
    moments: np.ndarray
    slope: Optional[float]
    bound: float
    tolerance: float
    passed: bool
    degenerate: bool = False
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {
            "t": self.t.tolist(),
            "moments": self.moments.tolist(),
            "slope": self.slope,
            "bound": self.bound,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "degenerate": self.degenerate,
            "warnings": self.warnings,
        }


def _grid_for(t_grid, n_steps):
    t = np.sort(np.asarray(t_grid, dtype=float))
    if np.any(t <= 0) or t[-1] > 1:
        raise DomainError("t_grid must lie in (0, 1]")
    grid = SimGrid(float(t[-1]), n_steps)
    idx = np.array([grid.index_of(s) for s in t])
    return t, grid, idx


def _slope_report(t, samples, p, bound, warnings):
    mom = np.mean(np.abs(samples) ** p, axis=0)
    tol = 0.1 * p
    if np.all(mom == 0):
        return SlopeReport(t, mom, None, bound, tol, True, True, warnings)
    if np.any(mom == 0):
        warnings.append("some moments vanish; slope uses the nonzero ones")
    pos = mom > 0
    slope = float(np.polyfit(np.log(t[pos]), np.log(mom[pos]), 1)[0])
    share = np.max(np.abs(samples) ** p, axis=0) / np.maximum(np.sum(np.abs(samples) ** p, axis=0), 1e-300)
    if samples.shape[0] < 1000 or np.any(share[pos] > 0.05):
        warnings.append("statistical power: p-th moment dominated by few paths or too few paths")
    return SlopeReport(t, mom, slope, bound, tol, bool(slope >= bound - tol), False, warnings)


def z_moment_diagnostic(model: SVIEModel, p: float, t_grid, n_paths: int, seed: int, n_steps: int = 512) -> SlopeReport:
    """Log-slope of ``E|Z_t|^p`` against the exponent corridor bound.

    ``Z_t = X_t - x0 - b(x0) integral_0^t K - sigma(x0) (K * dB)_t`` with the
    stochastic convolution computed from the same increments and weights.
    The bound is ``p min{1/2 + gamma (1 + chi_b), gamma (1 + chi_sigma)}``.
    """
    if not model.constant_initial:
        raise ConfigurationError("z_moment_diagnostic needs a constant initial value")
    pmin = max(2 / model.chi_b, 2 / model.chi_sigma)
    if p < pmin - 1e-12:
        raise ConfigurationError(f"p={p} below max(2/chi_b, 2/chi_sigma)={pmin}")
    t, grid, idx = _grid_for(t_grid, n_steps)
    wb, ws = convolution_weights(model.kernel, grid)
    ens = euler_volterra(model, grid, n_paths, seed, weights=(wb, ws))
    x0 = model.x0
    F = np.concatenate([[0.0], np.cumsum(wb)])
    noise = brownian_increments(seed, grid.n_steps, grid.dt, 0, n_paths)[ens.path_index]
    G = stochastic_convolution(ws, noise)
    b0 = float(model.drift(np.array([x0]))[0])
    s0 = float(model.diffusion(np.array([x0]))[0])
    Z = ens.values[:, idx] - x0 - b0 * F[idx] - s0 * G[:, idx]
    an = analyze_kernel(model.kernel, model.chi_b, model.chi_sigma)
    bound = p * min(0.5 + an.gamma * (1 + model.chi_b), an.gamma * (1 + model.chi_sigma))
    # deterministic parts cancel only up to rounding; clip that noise floor
    Z = np.where(np.abs(Z) < 1e-13 * (1 + abs(x0)), 0.0, Z)
    return _slope_report(t, Z, p, bound, [])


def moment_bound_check(model: SVIEModel, p: float, t_grid, n_paths: int, seed: int = 0, n_steps: int = 512) -> SlopeReport:
    """Log-slope of ``E|X_t - g(t)|^p``; passes when ``>= p gamma - 0.1 p``."""
    t, grid, idx = _grid_for(t_grid, n_steps)
    ens = euler_volterra(model, grid, n_paths, seed)
    D = ens.values[:, idx] - model.g(t)[None, :]
    an = analyze_kernel(model.kernel, model.chi_b, model.chi_sigma)
    return _slope_report(t, D, p, p * an.gamma, [])


# ---------------------------------------------------------------------------
# export

_MAGIC = b"VCLTENS1"


def write_ensemble_binary(path, ens: PathEnsemble) -> None:
    """Header (magic, length-prefixed JSON: seed, scheme, grid) then row-major little-endian float64."""
    header = {
        "seed": int(ens.seed),
        "scheme": ens.scheme,
        "T": ens.grid.T,
        "n_steps": ens.grid.n_steps,
        "n_paths": int(ens.values.shape[0]),
        "n_cols": int(ens.values.shape[1]),
        "dtype": "<f8",
        "n_flagged": ens.n_flagged,
    }
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(hb)))
        fh.write(hb)
        fh.write(np.ascontiguousarray(ens.values, dtype="<f8").tobytes())


def read_ensemble_binary(path) -> PathEnsemble:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ConfigurationError(f"{path} is not an ensemble file")
        (n,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(n).decode("utf-8"))
        data = np.frombuffer(fh.read(), dtype="<f8")
    vals = data.reshape(header["n_paths"], header["n_cols"]).copy()
    grid = SimGrid(header["T"], header["n_steps"])
    return PathEnsemble(vals, grid, header["seed"], header["scheme"], header.get("n_flagged", 0), np.arange(vals.shape[0]))


def write_ensemble_csv(path, ens: PathEnsemble) -> None:
    """One row per path; header ``path,t=<time>...``."""
    import csv

    times = ens.grid.times
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["path"] + [f"t={t:.10g}" for t in times])
        for i, row in zip(ens.path_index, ens.values):
            w.writerow([int(i)] + [repr(float(v)) for v in row])
