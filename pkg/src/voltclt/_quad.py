"""Thin wrappers around :func:`scipy.integrate.quad` used across the package.

Integrands on ``(0, t]`` with an integrable power singularity at the origin
are handled by the substitution ``s = exp(u)``, which turns algebraic decay
near zero into exponential decay on a half line.
"""

import math
import warnings

import numpy as np
from scipy import integrate

from .errors import IntegrationError

EPSREL = 1e-12
LIMIT = 400


def quad(f, a, b, *, epsrel=EPSREL, epsabs=0.0, points=None, what="integral", **kw):
    """Adaptive quadrature that raises instead of warning.

    The result is accepted when QUADPACK reports success, or when its error
    estimate is within ``1e3 * epsrel`` of the value (round-off stalls on
    well-resolved integrals are common at tight tolerances).
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        res = integrate.quad(
            f, a, b, epsrel=epsrel, epsabs=epsabs, limit=LIMIT, points=points,
            full_output=1, **kw,
        )
    val, err = res[0], res[1]
    ier = 0 if len(res) == 3 else 1
    if not np.isfinite(val):
        raise IntegrationError(f"{what}: non-finite value", {"value": val, "a": a, "b": b})
    if ier != 0 and err > max(1e3 * epsrel * abs(val), epsabs, 1e-300):
        raise IntegrationError(
            f"{what}: quadrature did not converge",
            {"value": val, "error_estimate": err, "a": a, "b": b},
        )
    return val


def quad_log(f, a, b, *, epsrel=EPSREL, what="integral"):
    """Integrate ``f`` over ``[a, b]`` with ``0 <= a < b`` in the variable ``log s``."""
    if b <= a:
        return 0.0
    hi = math.log(b)
    lo = -np.inf if a == 0.0 else math.log(a)

    def g(u):
        s = math.exp(u)
        # below 1e-300 an integrable f(s) s is negligible; it also overflows there
        return 0.0 if s < 1e-300 else f(s) * s

    if a == 0.0:
        # split so the finite piece carries the bulk and the tail is tame
        mid = hi - 8.0
        return quad(g, lo, mid, epsrel=epsrel, what=what) + quad(g, mid, hi, epsrel=epsrel, what=what)
    return quad(g, lo, hi, epsrel=epsrel, what=what)


def quad_halfline(f, lo, *, scale=1.0, epsrel=EPSREL, what="integral"):
    """Integrate ``f`` over ``(lo, inf)`` in the variable ``log(x - lo)``.

    ``scale`` is a characteristic length of ``x - lo`` used to place the
    split points; the integrand may be singular at ``lo`` and decay
    algebraically at infinity.
    """
    c = math.log(scale)

    def g(u):
        if u > 700.0:
            return 0.0
        z = math.exp(u)
        if z == 0.0 or not np.isfinite(z):
            return 0.0
        return f(lo + z) * z

    edges = [-np.inf, c - 12.0, c, c + 12.0, np.inf]
    return sum(
        quad(g, edges[i], edges[i + 1], epsrel=epsrel, what=what) for i in range(4)
    )
