"""Command-line entry point.

Exit codes: 0 success, 1 failed check (``--check`` only), 2 invalid input,
3 simulation or numerical failure.

Descriptors are compact ``name:key=value,...`` strings, e.g.
``riemann-liouville:H=0.3``, ``affine:kappa=0.3,theta=0.02`` or
``exp-sum:c0=0,terms=[[1,2],[0.5,1]]``.  A descriptor that starts with
``{`` is read as a YAML flow mapping.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

import yaml

from .config import dumps, execute_block, run_scenario
from .errors import RegimeError, VoltCLTError

__all__ = ["main", "parse_descriptor", "build_parser"]

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_SIM = 0, 1, 2, 3

_KERNEL_ALIASES = {"rl": "riemann-liouville"}


def _split_top(s: str):
    """Split on commas that are outside brackets."""
    parts, depth, cur = [], 0, []
    for ch in s:
        if ch in "[{(":
            depth += 1
        elif ch in "]})":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if cur:
        parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


def parse_descriptor(text: str, key: str = "family") -> dict:
    """``"name:k=v,..."`` to ``{key: name, k: v, ...}`` with YAML-typed values."""
    text = text.strip()
    if text.startswith("{"):
        d = yaml.safe_load(text)
        if not isinstance(d, dict):
            raise argparse.ArgumentTypeError(f"not a mapping: {text!r}")
        return d
    name, _, rest = text.partition(":")
    if not name:
        raise argparse.ArgumentTypeError(f"empty descriptor {text!r}")
    if key == "family":
        name = _KERNEL_ALIASES.get(name, name)
    d = {key: name}
    for item in _split_top(rest):
        k, eq, v = item.partition("=")
        if not eq:
            raise argparse.ArgumentTypeError(f"expected key=value in {item!r}")
        d[k.strip()] = yaml.safe_load(v)
    return d


def _kernel_arg(s):
    return parse_descriptor(s, "family")


def _coef_arg(s):
    try:
        return float(s)
    except ValueError:
        return parse_descriptor(s, "kind")


def _floats(s):
    return [float(x) for x in s.split(",") if x]


def _ints(s):
    return [int(x) for x in s.split(",") if x]


def _common(p, *, seed=True, paths=True, steps=False):
    if seed:
        p.add_argument("--seed", type=int, default=0)
    if paths:
        p.add_argument("--paths", type=int, default=None, help="Monte Carlo paths")
    if steps:
        p.add_argument("--steps", type=int, default=None, help="time steps")
    p.add_argument("--check", action="store_true", help="exit 1 if any tolerance fails")
    p.add_argument("--out", default=None, help="artifact directory")


def _model_args(p, kernel_required=True):
    p.add_argument("--kernel", type=_kernel_arg, required=kernel_required)
    p.add_argument("--drift", type=_coef_arg, default=0.0)
    p.add_argument("--diffusion", type=_coef_arg, default=1.0)
    p.add_argument("--x0", type=float, default=0.0)


def _model(a):
    return {"kernel": a.kernel, "drift": a.drift, "diffusion": a.diffusion, "x0": a.x0}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="voltclt", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernel-info", help="order constants, lambda(n) and the limit kernel")
    p.add_argument("kernel", type=_kernel_arg)
    p.add_argument("--n", type=_ints, default=[1, 10, 100, 1000, 10000])
    p.add_argument("--chi-b", type=float, default=1.0)
    p.add_argument("--chi-sigma", type=float, default=1.0)
    _common(p, seed=False, paths=False)

    p = sub.add_parser("simulate", help="Volterra-Euler paths")
    _model_args(p)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--scheme", choices=["direct-conv", "fft-conv"], default="direct-conv")
    p.add_argument("--format", choices=["binary", "csv", "none"], default="binary")
    _common(p, steps=True)

    p = sub.add_parser("clt-test", help="finite-dimensional CLT goodness of fit")
    _model_args(p)
    p.add_argument("--times", type=_floats, default=[1.0])
    p.add_argument("--n", type=_ints, default=[16, 64, 256, 1024])
    p.add_argument("--m", type=int, default=256)
    _common(p)

    p = sub.add_parser("fclt-test", help="path-functional CLT test")
    _model_args(p)
    p.add_argument("--n", type=_ints, default=[256])
    p.add_argument("--functional", choices=["path-integral", "sup-abs"], default="path-integral")
    p.add_argument("--m", type=int, default=256)
    _common(p)

    p = sub.add_parser("delta-test", help="delta-method limit of f(X)")
    _model_args(p)
    p.add_argument("--transform", type=lambda s: parse_descriptor(s, "kind"), required=True, help="e.g. quadratic:center=0")
    p.add_argument("--times", type=_floats, default=[1.0])
    p.add_argument("--n", type=_ints, default=[16, 256])
    p.add_argument("--order", type=int, choices=[1, 2], default=None)
    _common(p)

    p = sub.add_parser("lift-check", help="lift-CLT preconditions for shifted weight functionals")
    p.add_argument("kernel", type=_kernel_arg)
    p.add_argument("--shifts", type=_floats, default=[])
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--chi-sigma", type=float, default=1.0)
    p.add_argument("--chi-g", type=float, default=float("inf"))
    p.add_argument("--theta", type=float, default=None)
    _common(p, seed=False, paths=False)

    p = sub.add_parser("price", help="short-maturity variance digital")
    _model_args(p)
    p.add_argument("--n", type=_ints, default=[1024])
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--tolerance", type=float, default=0.03)
    _common(p, steps=True)

    p = sub.add_parser("calibrate-h", help="grid-search H from digital quotes")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--quotes", help="CSV with maturity, strike, price")
    src.add_argument("--synthetic", type=lambda s: parse_descriptor("synthetic:" + s, "kind"), help="H=0.3,n_quotes=20,noise=0.005,seed=1")
    p.add_argument("--v0", type=float, required=True)
    p.add_argument("--sigma-v0", type=float, required=True)
    p.add_argument("--h-step", type=float, default=0.01)
    p.add_argument("--delta", type=float, default=1 / 16)
    p.add_argument("--Delta", type=float, default=None)
    p.add_argument("--gamma-normalized", action="store_true")
    _common(p, paths=False)

    p = sub.add_parser("run", help="run a YAML scenario")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int, default=None, help="override the global seed")
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--parallel", action="store_true")
    p.add_argument("--check", action="store_true")
    p.add_argument("--out", default=None)
    return ap


def _block(a) -> dict:
    c = a.command
    if c == "kernel-info":
        return {"type": "kernel-info", "name": c, "kernel": a.kernel, "n": a.n, "chi_b": a.chi_b, "chi_sigma": a.chi_sigma}
    if c == "simulate":
        b = {"type": "simulate", "model": _model(a), "T": a.T, "scheme": a.scheme, "format": a.format if a.out else "none"}
    elif c == "clt-test":
        b = {"type": "clt", "model": _model(a), "times": a.times, "n": a.n, "m": a.m}
    elif c == "fclt-test":
        b = {"type": "fclt", "model": _model(a), "n": a.n, "functional": a.functional, "m": a.m}
    elif c == "delta-test":
        b = {"type": "delta", "model": _model(a), "transform": a.transform, "times": a.times, "n": a.n, "order": a.order}
    elif c == "lift-check":
        return {"type": "lift-check", "name": c, "kernel": a.kernel, "shifts": a.shifts, "eta": a.eta, "chi_sigma": a.chi_sigma, "chi_g": a.chi_g, "theta": a.theta}
    elif c == "price":
        b = {"type": "price", "model": _model(a), "n": a.n, "a": a.a, "beta": a.beta, "tolerance": a.tolerance}
    elif c == "calibrate-h":
        b = {"type": "calibrate", "v0": a.v0, "sigma_v0": a.sigma_v0, "h_step": a.h_step, "delta": a.delta, "Delta": a.Delta, "gamma_normalized": a.gamma_normalized}
        if a.quotes:
            b["quotes"] = a.quotes
        else:
            syn = dict(a.synthetic)
            syn.pop("kind")
            b["synthetic"] = syn
        b["name"] = c
        return b
    else:  # pragma: no cover - argparse restricts commands
        raise ValueError(c)
    b["name"] = c
    return b


def main(argv: Optional[list] = None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    try:
        if a.command == "run":
            ov = {"seed": a.seed, "paths": a.paths, "steps": a.steps, "parallel": a.parallel, "out": a.out}
            man = run_scenario(a.scenario, ov)
            print(dumps(man.to_dict()))
            passed = man.passed
        else:
            ov = {"paths": getattr(a, "paths", None), "steps": getattr(a, "steps", None)}
            res = execute_block(_block(a), getattr(a, "seed", 0), ov, a.out)
            print(dumps({"name": res.name, "type": res.type, "seed": res.seed, "passed": res.passed, "report": res.report}))
            passed = res.passed
    except (ValueError, RegimeError, OSError) as exc:
        # configuration, domain and regime errors are ValueErrors or raised before simulating
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except VoltCLTError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIM
    if a.check and not passed:
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
