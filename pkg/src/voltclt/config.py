"""Scenario files, block execution, run manifests and plot data.

A scenario is a YAML mapping::

    seed: 20240601          # global seed
    output: out             # artifact directory
    tolerances: {frobenius: 0.02}
    kernels:                # named kernel descriptors
      rl: {family: riemann-liouville, H: 0.3}
    models:                 # named SVIE descriptors
      heston:
        kernel: rl          # name or inline descriptor
        drift: {kind: affine, kappa: 0.3, theta: 0.02}
        diffusion: {kind: sqrt-pos, xi: 0.3}
        x0: 0.02
    experiments:            # blocks, run in order
      - {type: kernel-info, name: rl-info, kernel: rl}
      - {type: clt, name: cir, model: heston, times: [1.0], n: [16, 1024], paths: 20000}

Block types and fields are listed in :data:`BLOCK_FIELDS`.  Every block is
validated before any block runs.  A block's seed is derived from the global
seed, its name and the number of earlier blocks with the same name, so
inserting or reordering blocks leaves the seeds of the others unchanged.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import yaml

from . import __version__
from .bernstein_lift import measure_for_kernel, semigroup_apply, weight_element
from .clt_harness import (
    KS_CRIT_95,
    KS_SD,
    CLTExperiment,
    GOFReport,
    HarmonicSequence,
    Identity,
    Polynomial,
    Quadratic,
    delta_method_samples,
    fclt_functional_test,
    fdd_test,
    ks_trend,
    lift_fdd_test,
    lift_precondition_check,
    normalized_marginals,
)
from .errors import ConfigurationError, UsageError
from .kernels import TabulatedLimit, analyze_kernel, kernel_from_dict, kernel_to_dict, lambda_n, limit_kernel
from .svie_sim import (
    SimGrid,
    SVIEModel,
    coefficient_from_dict,
    coefficient_to_dict,
    euler_volterra,
    fft_convolution,
    write_ensemble_binary,
    write_ensemble_csv,
)
from .variance_pricing import (
    CalibrationResult,
    DigitalSpec,
    VarianceModel,
    calibrate_h,
    default_h_grid,
    mc_digital_price,
    read_quotes_csv,
    synthetic_quotes,
)

__all__ = [
    "Scenario",
    "RunManifest",
    "BlockResult",
    "load_scenario",
    "parse_scenario",
    "run_scenario",
    "block_seed",
    "emit_plotdata",
    "BLOCK_FIELDS",
    "execute_block",
    "dumps",
]

BLOCK_FIELDS = {
    "kernel-info": {"kernel", "n", "chi_b", "chi_sigma"},
    "simulate": {"model", "T", "steps", "paths", "scheme", "format"},
    "clt": {"model", "times", "n", "paths", "m"},
    "fclt": {"model", "n", "functional", "paths", "m"},
    "delta": {"model", "transform", "times", "n", "paths", "order"},
    "lift": {"model", "shifts", "times", "n", "paths", "eta"},
    "lift-check": {"kernel", "shifts", "weight", "eta", "chi_sigma", "chi_g", "theta"},
    "price": {"model", "n", "a", "beta", "paths", "steps", "tolerance"},
    "calibrate": {"quotes", "synthetic", "v0", "sigma_v0", "h_step", "delta", "Delta", "gamma_normalized", "expect_H", "tolerance"},
}


def block_seed(global_seed: int, name: str, occurrence: int = 0) -> int:
    """63-bit seed from ``sha256(global_seed, name, occurrence)``."""
    h = hashlib.sha256(f"{int(global_seed)}|{name}|{int(occurrence)}".encode("utf-8")).digest()
    return int.from_bytes(h[:8], "little") >> 1


# ---------------------------------------------------------------------------
# parsing


@dataclass
class Block:
    type: str
    name: str
    fields: dict
    occurrence: int = 0


@dataclass
class Scenario:
    seed: int
    output: str
    tolerances: dict
    kernels: dict
    models: dict
    blocks: list
    source: dict = field(default_factory=dict)

    @property
    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.source, sort_keys=True, default=str).encode("utf-8")).hexdigest()


def _kernel(desc, kernels):
    if isinstance(desc, str):
        if desc not in kernels:
            raise ConfigurationError(f"unknown kernel name {desc!r}")
        return kernels[desc]
    return kernel_from_dict(desc)


def _model(desc, kernels, models):
    if isinstance(desc, str):
        if desc not in models:
            raise ConfigurationError(f"unknown model name {desc!r}")
        return models[desc]
    if not isinstance(desc, dict):
        raise ConfigurationError(f"model descriptor must be a mapping, got {desc!r}")
    extra = set(desc) - {"kernel", "drift", "diffusion", "x0", "chi_b", "chi_sigma"}
    if extra:
        raise ConfigurationError(f"unknown model fields {sorted(extra)}")
    try:
        return SVIEModel(
            _kernel(desc["kernel"], kernels),
            coefficient_from_dict(desc.get("drift", 0.0)),
            coefficient_from_dict(desc.get("diffusion", 0.0)),
            float(desc.get("x0", 0.0)),
            desc.get("chi_b"),
            desc.get("chi_sigma"),
        )
    except KeyError as exc:
        raise ConfigurationError(f"model is missing {exc}") from None


def model_to_dict(m: SVIEModel) -> dict:
    return {
        "kernel": kernel_to_dict(m.kernel),
        "drift": coefficient_to_dict(m.drift),
        "diffusion": coefficient_to_dict(m.diffusion),
        "x0": m.x0,
        "chi_b": m.chi_b,
        "chi_sigma": m.chi_sigma,
    }


def _kbar_dict(kbar) -> dict:
    d = {"type": type(kbar).__name__}
    if isinstance(kbar, TabulatedLimit):
        d["size"] = len(kbar.grid)
    else:
        d.update({a: getattr(kbar, a) for a in kbar.__dataclass_fields__})
    return d


def _as_list(x):
    return list(x) if isinstance(x, (list, tuple)) else [x]


def _transform(desc):
    if desc is None or desc == "identity":
        return Identity()
    if not isinstance(desc, dict):
        raise ConfigurationError(f"transform must be a mapping, got {desc!r}")
    kind = str(desc.get("kind", "")).lower()
    allowed = {"identity": set(), "quadratic": {"center", "scale"}, "polynomial": {"coeffs"}}
    if kind not in allowed:
        raise ConfigurationError(f"unknown transform {desc!r}")
    extra = set(desc) - allowed[kind] - {"kind"}
    if extra:
        raise ConfigurationError(f"unknown {kind} transform fields {sorted(extra)}")
    if kind == "identity":
        return Identity()
    if kind == "quadratic":
        if "center" not in desc:
            raise ConfigurationError("quadratic transform needs 'center'")
        return Quadratic(float(desc["center"]), float(desc.get("scale", 1.0)))
    if "coeffs" not in desc:
        raise ConfigurationError("polynomial transform needs 'coeffs'")
    return Polynomial(tuple(float(c) for c in desc["coeffs"]))


def parse_scenario(data: Optional[dict]) -> Scenario:
    """Validate a scenario mapping (fail fast, before any simulation)."""
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigurationError("scenario must be a mapping")
    extra = set(data) - {"seed", "output", "tolerances", "kernels", "models", "experiments"}
    if extra:
        raise ConfigurationError(f"unknown scenario keys {sorted(extra)}")
    kernels = {k: kernel_from_dict(v) for k, v in (data.get("kernels") or {}).items()}
    models = {k: _model(v, kernels, {}) for k, v in (data.get("models") or {}).items()}
    blocks, seen = [], {}
    for i, raw in enumerate(data.get("experiments") or []):
        if not isinstance(raw, dict) or "type" not in raw:
            raise ConfigurationError(f"experiment {i} needs a 'type'")
        typ = str(raw["type"])
        if typ not in BLOCK_FIELDS:
            raise ConfigurationError(f"unknown experiment type {typ!r}")
        name = str(raw.get("name", f"{typ}-{i}"))
        fields = {k: v for k, v in raw.items() if k not in ("type", "name")}
        bad = set(fields) - BLOCK_FIELDS[typ]
        if bad:
            raise ConfigurationError(f"block {name!r}: unknown fields {sorted(bad)}")
        occ = seen.get(name, 0)
        seen[name] = occ + 1
        blocks.append(Block(typ, name, fields, occ))
    sc = Scenario(
        int(data.get("seed", 0)),
        str(data.get("output", "out")),
        dict(data.get("tolerances") or {}),
        kernels,
        models,
        blocks,
        data,
    )
    for b in blocks:
        try:
            _prepare(b, sc)  # validation pass
        except (KeyError, TypeError, AttributeError) as exc:
            raise ConfigurationError(f"block {b.name!r}: malformed field ({exc!r})") from exc
    return sc


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"cannot parse {path}: {exc}") from None
    return parse_scenario(data)


# ---------------------------------------------------------------------------
# block execution


@dataclass
class BlockResult:
    name: str
    type: str
    seed: int
    report: dict
    passed: bool
    wall_time: float = 0.0
    artifacts: dict = field(default_factory=dict)  # relative path -> sha256
    deterministic: bool = True


def _sha(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2, default=_jsonable, ensure_ascii=False)
        fh.write("\n")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.bool_):
        return bool(x)
    return str(x)


@dataclass
class _Prepared:
    run: Callable  # (seed, outdir, overrides) -> (report, passed, files)


def _need(b, *keys):
    for k in keys:
        if k not in b.fields:
            raise ConfigurationError(f"block {b.name!r} ({b.type}) needs field {k!r}")


def _prepare(b: Block, sc: Scenario) -> _Prepared:
    f = b.fields
    tol = sc.tolerances
    if b.type == "kernel-info":
        _need(b, "kernel")
        k = _kernel(f["kernel"], sc.kernels)
        ns = [int(x) for x in _as_list(f.get("n", [1, 10, 100, 1000, 10000]))]
        chi_b, chi_s = float(f.get("chi_b", 1.0)), float(f.get("chi_sigma", 1.0))

        def run(seed, out, ov):
            an = analyze_kernel(k, chi_b, chi_s)
            try:
                kbar_d = _kbar_dict(limit_kernel(k, numeric=an.source != "closed-form"))
            except Exception as exc:  # no limit is a reportable outcome
                kbar_d = {"type": None, "error": str(exc)}
            rep = {"kernel": kernel_to_dict(k), "analysis": an.to_dict(), "lambda": [{"n": n, "lambda": lambda_n(k, n)} for n in ns], "kbar": kbar_d}
            return rep, True, {}

        return _Prepared(run)

    if b.type == "simulate":
        _need(b, "model")
        model = _model(f["model"], sc.kernels, sc.models)
        scheme = str(f.get("scheme", "direct-conv"))
        fmt = str(f.get("format", "binary"))
        if scheme not in ("direct-conv", "fft-conv"):
            raise ConfigurationError(f"unknown scheme {scheme!r}")
        if fmt not in ("binary", "csv", "none"):
            raise ConfigurationError(f"unknown format {fmt!r}")

        def run(seed, out, ov):
            grid = SimGrid(float(f.get("T", 1.0)), int(ov.get("steps") or f.get("steps", 256)))
            paths = int(ov.get("paths") or f.get("paths", 1000))
            sim = euler_volterra if scheme == "direct-conv" else fft_convolution
            ens = sim(model, grid, paths, seed)
            files = {}
            if fmt == "binary":
                files["paths.bin"] = lambda p: write_ensemble_binary(p, ens)
            elif fmt == "csv":
                files["paths.csv"] = lambda p: write_ensemble_csv(p, ens)
            vT = ens.values[:, -1]
            rep = {
                "model": model_to_dict(model),
                "scheme": scheme,
                "T": grid.T,
                "steps": grid.n_steps,
                "paths": paths,
                "n_flagged": ens.n_flagged,
                "negative_fraction": ens.negative_fraction,
                "terminal_mean": float(vT.mean()),
                "terminal_var": float(vT.var(ddof=1)) if vT.size > 1 else 0.0,
            }
            return rep, True, files

        return _Prepared(run)

    if b.type == "clt":
        _need(b, "model", "times")
        model = _model(f["model"], sc.kernels, sc.models)
        exp = CLTExperiment(model, tuple(_as_list(f["times"])), tuple(int(n) for n in _as_list(f.get("n", [16, 64, 256, 1024]))), m=int(f.get("m", 256)))
        kbar = limit_kernel(model.kernel, numeric=analyze_kernel(model.kernel).source != "closed-form")

        def run(seed, out, ov):
            paths = int(ov.get("paths") or f.get("paths", 10000))
            reports, curve = [], []
            for n in exp.n_sequence:
                s = normalized_marginals(exp, n, paths, seed)
                r = fdd_test(s, kbar, exp.sigma_xbar, exp.times, tol, seed=seed)
                reports.append({"n": n, **r.to_dict()})
                curve.append({"n": n, "ks": r.marginals[-1]["ks"], "ks_band": r.tolerances["ks_band_factor"] * KS_CRIT_95 / math.sqrt(paths)})
            ok = all(all(r["passed"].values()) for r in reports)
            rep = {"model": model_to_dict(model), "times": list(exp.times), "reports": reports, "curve": curve}
            files = {
                "ks_curve.csv": lambda p: emit_plotdata(rep, "ks-curve", p),
                "covariance.csv": lambda p: emit_plotdata(reports[-1], "covariance-heatmap", p),
            }
            return rep, ok, files

        return _Prepared(run)

    if b.type == "fclt":
        _need(b, "model")
        model = _model(f["model"], sc.kernels, sc.models)
        exp = CLTExperiment(model, (1.0,), m=int(f.get("m", 256)))
        functional = str(f.get("functional", "path-integral"))
        if functional not in ("path-integral", "sup-abs"):
            raise ConfigurationError(f"unknown functional {functional!r}")

        def run(seed, out, ov):
            paths = int(ov.get("paths") or f.get("paths", 10000))
            entries = [fclt_functional_test(exp, int(n), functional, paths, seed, tolerances=tol) for n in _as_list(f.get("n", [256]))]
            ok = all(e.get("passed", True) for e in entries)
            return {"model": model_to_dict(model), "entries": entries}, ok, {}

        return _Prepared(run)

    if b.type == "delta":
        _need(b, "model", "transform")
        model = _model(f["model"], sc.kernels, sc.models)
        exp = CLTExperiment(model, tuple(_as_list(f.get("times", [1.0]))), transform=_transform(f["transform"]))
        order = f.get("order")

        def run(seed, out, ov):
            paths = int(ov.get("paths") or f.get("paths", 10000))
            band = tol.get("ks_band_factor", 2.0) * KS_CRIT_95 / math.sqrt(paths)
            entries = []
            for n in _as_list(f.get("n", [16, 256])):
                d = delta_method_samples(exp, int(n), paths, seed, order=order)
                for j, t in enumerate(exp.times):
                    ks = d.ks(j)
                    entries.append({"n": int(n), "time": t, "order": d.order, "ks": float(ks.statistic), "pvalue": float(ks.pvalue), "band": band, "passed": bool(ks.statistic < band)})
            return {"model": model_to_dict(model), "entries": entries}, all(e["passed"] for e in entries), {}

        return _Prepared(run)

    if b.type == "lift":
        _need(b, "model", "shifts", "times")
        model = _model(f["model"], sc.kernels, sc.models)
        measure = measure_for_kernel(model.kernel)
        eta = float(f.get("eta", 0.0))
        comps = [semigroup_apply(float(e), weight_element(eta)) for e in _as_list(f["shifts"])]
        times = tuple(float(t) for t in _as_list(f["times"]))
        if len(times) != len(comps):
            raise ConfigurationError(f"block {b.name!r}: one time per shift is required")

        def run(seed, out, ov):
            paths = int(ov.get("paths") or f.get("paths", 10000))
            rep, _ = lift_fdd_test(model, measure, comps, times, int(f.get("n", 256)), paths, seed, eta=eta, tolerances=tol)
            d = rep.to_dict()
            return d, rep.ok, {"covariance.csv": lambda p: emit_plotdata(d, "covariance-heatmap", p)}

        return _Prepared(run)

    if b.type == "lift-check":
        _need(b, "kernel")
        k = _kernel(f["kernel"], sc.kernels)
        measure = measure_for_kernel(k)
        eta = float(f.get("eta", 0.0))
        ys = [semigroup_apply(float(e), weight_element(eta)) for e in _as_list(f.get("shifts", []))]
        if f.get("weight", not ys):
            ys.append(weight_element(eta))
        chi_g = float(f.get("chi_g", math.inf))

        def run(seed, out, ov):
            r = lift_precondition_check(measure, ys, float(f.get("chi_sigma", 1.0)), chi_g, eta, theta=f.get("theta"))
            return r.to_dict(), r.all_satisfied, {}

        return _Prepared(run)

    if b.type == "price":
        _need(b, "model")
        model = _model(f["model"], sc.kernels, sc.models)
        vm = VarianceModel(model, model.x0)
        an = analyze_kernel(model.kernel, model.chi_b, model.chi_sigma)
        specs = [DigitalSpec(int(n), float(f.get("a", 0.0)), float(f.get("beta", 0.0))) for n in _as_list(f.get("n", [1024]))]
        for s in specs:
            s.regime(an.gamma_star)
        ptol = float(f.get("tolerance", tol.get("price", 0.03)))

        def run(seed, out, ov):
            paths = int(ov.get("paths") or f.get("paths", 10000))
            steps = int(ov.get("steps") or f.get("steps", 256))
            reps = [mc_digital_price(vm, s, steps, paths, seed).to_dict() for s in specs]
            last = reps[-1]
            ok = abs(last["mc_price"] - last["asymptotic_price"]) <= last["ci_halfwidth"] + ptol
            rep = {"model": model_to_dict(model), "prices": reps, "tolerance": ptol}
            return rep, bool(ok), {"price_convergence.csv": lambda p: emit_plotdata(rep, "price-convergence", p)}

        return _Prepared(run)

    if b.type == "calibrate":
        _need(b, "v0", "sigma_v0")
        if ("quotes" in f) == ("synthetic" in f):
            raise ConfigurationError(f"block {b.name!r}: give exactly one of 'quotes' or 'synthetic'")
        v0, s0 = float(f["v0"]), float(f["sigma_v0"])
        grid = default_h_grid(float(f.get("h_step", 0.01)))
        gn = bool(f.get("gamma_normalized", False))
        syn = f.get("synthetic")
        if syn is not None and not isinstance(syn, dict):
            raise ConfigurationError("synthetic must be a mapping {H, n_quotes, noise, seed}")

        def run(seed, out, ov):
            if syn is not None:
                quotes = synthetic_quotes(float(syn["H"]), v0, s0, int(syn.get("n_quotes", 15)), noise=float(syn.get("noise", 0.0)), seed=int(syn.get("seed", seed)), gamma_normalized=gn)
            else:
                quotes = read_quotes_csv(f["quotes"])
            r = calibrate_h(quotes, v0, s0, grid, float(f.get("delta", 1 / 16)), f.get("Delta"), gamma_normalized=gn)
            ok = True
            if "expect_H" in f:
                ok = abs(r.H_hat - float(f["expect_H"])) <= float(f.get("tolerance", 1e-12))
            return r.to_dict(), ok, {"loss_curve.csv": lambda p: emit_plotdata(r, "loss-curve", p)}

        return _Prepared(run)

    raise ConfigurationError(f"unknown block type {b.type!r}")


# ---------------------------------------------------------------------------
# running


@dataclass
class RunManifest:
    scenario_hash: str
    version: str
    seed: int
    blocks: list
    output: str

    @property
    def passed(self) -> bool:
        return all(b.passed for b in self.blocks)

    @property
    def deterministic_hash(self) -> str:
        h = hashlib.sha256()
        for b in self.blocks:
            for path in sorted(b.artifacts):
                h.update(f"{b.name}/{path}:{b.artifacts[path]}".encode("utf-8"))
        return h.hexdigest()

    def to_dict(self) -> dict:
        return {
            "scenario_hash": self.scenario_hash,
            "version": self.version,
            "seed": self.seed,
            "output": self.output,
            "passed": self.passed,
            "deterministic_hash": self.deterministic_hash,
            "blocks": [
                {"name": b.name, "type": b.type, "seed": b.seed, "passed": b.passed, "wall_time": b.wall_time, "artifacts": b.artifacts}
                for b in self.blocks
            ],
        }


def _run_block(b: Block, sc: Scenario, out_root: str, overrides: dict) -> BlockResult:
    seed = block_seed(sc.seed, b.name, b.occurrence)
    prep = _prepare(b, sc)
    d = os.path.join(out_root, b.name if b.occurrence == 0 else f"{b.name}.{b.occurrence}")
    os.makedirs(d, exist_ok=True)
    t0 = time.perf_counter()
    rep, passed, files = prep.run(seed, d, overrides)
    wall = time.perf_counter() - t0
    _write_json(os.path.join(d, "report.json"), {"name": b.name, "type": b.type, "seed": seed, "passed": passed, "report": rep})
    arts = {"report.json": _sha(os.path.join(d, "report.json"))}
    for fname, writer in files.items():
        p = os.path.join(d, fname)
        writer(p)
        arts[fname] = _sha(p)
    return BlockResult(b.name, b.type, seed, rep, bool(passed), wall, arts)


def run_scenario(scenario, overrides: Optional[dict] = None) -> RunManifest:
    """Run every block and write ``<output>/manifest.json``.

    ``scenario`` is a path or a :class:`Scenario`.  ``overrides`` may hold
    ``seed``, ``paths``, ``steps``, ``out`` and ``parallel``.
    """
    ov = dict(overrides or {})
    sc = load_scenario(scenario) if not isinstance(scenario, Scenario) else scenario
    if ov.get("seed") is not None:
        sc.seed = int(ov["seed"])
    out_root = ov.get("out") or sc.output
    os.makedirs(out_root, exist_ok=True)
    if ov.get("parallel") and len(sc.blocks) > 1:
        with ThreadPoolExecutor(min(len(sc.blocks), os.cpu_count() or 1)) as ex:
            results = list(ex.map(lambda b: _run_block(b, sc, out_root, ov), sc.blocks))
    else:
        results = [_run_block(b, sc, out_root, ov) for b in sc.blocks]
    man = RunManifest(sc.hash, __version__, sc.seed, results, out_root)
    _write_json(os.path.join(out_root, "manifest.json"), man.to_dict())
    return man


# ---------------------------------------------------------------------------
# plot data

PLOT_KINDS = {
    "ks-curve": ("n", "ks", "ks_band"),
    "loss-curve": ("H", "L"),
    "covariance-heatmap": ("i", "j", "empirical", "target"),
    "price-convergence": ("n", "mc_price", "ci_halfwidth", "asymptotic_price"),
}


def _rows(report, kind):
    if kind == "loss-curve":
        if isinstance(report, CalibrationResult):
            report = report.to_dict()
        if not (isinstance(report, dict) and "h_grid" in report and "loss" in report):
            raise UsageError("loss-curve needs a calibration result")
        return list(zip(report["h_grid"], report["loss"]))
    if kind == "ks-curve":
        if not (isinstance(report, dict) and "curve" in report):
            raise UsageError("ks-curve needs a report with a 'curve' list")
        band = report.get("ks_band")
        rows = []
        for c in report["curve"]:
            b = c.get("ks_band", band)
            if b is None and "se" in report:
                b = 2.0 * KS_CRIT_95 * report["se"] / KS_SD  # ks_trend output: se = KS_SD / sqrt(N)
            rows.append((c["n"], c["ks"], b))
        return rows
    if kind == "covariance-heatmap":
        if isinstance(report, GOFReport):
            report = report.to_dict()
        if not (isinstance(report, dict) and report.get("cov_empirical") is not None):
            raise UsageError("covariance-heatmap needs a goodness-of-fit report")
        E, T = np.asarray(report["cov_empirical"]), np.asarray(report["cov_target"])
        return [(i, j, float(E[i, j]), float(T[i, j])) for i in range(E.shape[0]) for j in range(E.shape[1])]
    if kind == "price-convergence":
        if not (isinstance(report, dict) and "prices" in report):
            raise UsageError("price-convergence needs a report with a 'prices' list")
        return [(p["inputs"]["n"], p["mc_price"], p["ci_halfwidth"], p["asymptotic_price"]) for p in report["prices"]]
    raise UsageError(f"unknown plot kind {kind!r}; expected one of {sorted(PLOT_KINDS)}")


def emit_plotdata(report, kind: str, path) -> str:
    """Write a headered CSV with the columns of :data:`PLOT_KINDS` ``[kind]``."""
    if kind not in PLOT_KINDS:
        raise UsageError(f"unknown plot kind {kind!r}; expected one of {sorted(PLOT_KINDS)}")
    rows = _rows(report, kind)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        w.writerow(PLOT_KINDS[kind])
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in r])
    return str(path)


def execute_block(block: dict, seed: int, overrides: Optional[dict] = None, out: Optional[str] = None) -> BlockResult:
    """Validate and run one block dict with ``seed`` used as is.

    Artifacts are written under ``out`` when it is given.
    """
    sc = parse_scenario({"seed": seed, "experiments": [block]})
    b = sc.blocks[0]
    prep = _prepare(b, sc)
    t0 = time.perf_counter()
    rep, passed, files = prep.run(seed, out, dict(overrides or {}))
    res = BlockResult(b.name, b.type, seed, rep, bool(passed), time.perf_counter() - t0)
    if out is not None:
        os.makedirs(out, exist_ok=True)
        _write_json(os.path.join(out, "report.json"), {"name": b.name, "type": b.type, "seed": seed, "passed": res.passed, "report": rep})
        res.artifacts["report.json"] = _sha(os.path.join(out, "report.json"))
        for fname, writer in files.items():
            p = os.path.join(out, fname)
            writer(p)
            res.artifacts[fname] = _sha(p)
    return res


def dumps(obj) -> str:
    """JSON with sorted keys."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable, ensure_ascii=False)
