"""Config-driven command-line front end.

Subcommands: estimate (annealed sample solver), analytic (closed forms),
kl (tilt baseline), price, compare (all methods side by side), gen-samples.
Every run writes a JSON manifest (config echo, resolved defaults, timings,
residuals, warnings) atomically next to its outputs.

Exit codes: 0 success, 1 error, 2 completed with warnings (residuals above
tolerance, infeasible targets, empty restriction mass).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import asdict

import numpy as np

from . import __version__
from .analytic import (
    MixedMeasure,
    solve_indicator_disk,
    solve_indicator_halfplane,
    solve_indicator_interval,
    solve_relu_multi,
)
from .constraints import (
    ConstraintSpec,
    Heaviside,
    IndicatorOutsideDisk,
    IndicatorOutsideHalfplane,
    IndicatorOutsideInterval,
    Relu,
    target_from_surrogate,
)
from .errors import ConfigError, CotError, InfeasibleTargets, ZeroMass
from .kl import KlSolution, kl_density, kl_indicator, kl_relu_multi, kl_sample
from .measures import (
    EmpiricalMeasure,
    Gaussian2D,
    Lognormal,
    Normal1D,
    UniformDisk,
    read_samples_csv,
    sample,
    write_samples_csv,
)
from .pricing import (
    AssetOrNothing,
    CashOrNothing,
    DownAndOutCall,
    VanillaCall,
    calibrate,
    closed_form_price,
    price,
    report,
)
from .solver import BarrierConfig, SolverConfig, run

__all__ = ["main"]


# ---------------------------------------------------------------------------
# config parsing (strict: unknown keys are rejected with the offending name)
# ---------------------------------------------------------------------------


def _require_keys(obj: dict, allowed: set, context: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{context}: expected an object")
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{context}: unknown key '{key}'")


def _number(obj, key, context, default=None, required=False):
    if key not in obj or obj[key] is None:
        if required:
            raise ConfigError(f"{context}: missing key '{key}'")
        return default
    v = obj[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{context}.{key}: expected a number")
    return float(v)


def parse_prior(obj: dict, context: str = "prior"):
    _require_keys(obj, {"kind", "mu", "sigma", "mean", "cov", "radius", "samples_path"}, context)
    if "samples_path" in obj:
        return ("samples", obj["samples_path"])
    kind = obj.get("kind")
    if kind == "lognormal":
        return ("spec", Lognormal(_number(obj, "mu", context, required=True),
                                  _number(obj, "sigma", context, required=True)))
    if kind == "normal":
        return ("spec", Normal1D(_number(obj, "mu", context, required=True),
                                 _number(obj, "sigma", context, required=True)))
    if kind == "gaussian2d":
        mean = obj.get("mean", [0.0, 0.0])
        cov = obj.get("cov", [[1.0, 0.0], [0.0, 1.0]])
        return ("spec", Gaussian2D(tuple(mean), tuple(map(tuple, cov))))
    if kind == "uniform_disk":
        return ("spec", UniformDisk(_number(obj, "radius", context, required=True)))
    raise ConfigError(f"{context}.kind: unknown prior kind '{kind}'")


def parse_constraint(obj: dict, idx: int, scale: str):
    context = f"constraints[{idx}]"
    _require_keys(
        obj,
        {"kind", "omega", "x0", "a", "b", "radius", "threshold", "fbar", "surrogate", "weight"},
        context,
    )
    kind_name = obj.get("kind")
    strike_scale = (lambda v: math.exp(v)) if scale == "log" else (lambda v: v)
    if kind_name == "relu":
        kind = Relu(strike_scale(_number(obj, "omega", context, required=True)))
    elif kind_name == "heaviside":
        kind = Heaviside(_number(obj, "x0", context, required=True))
    elif kind_name == "indicator_outside_interval":
        kind = IndicatorOutsideInterval(
            _number(obj, "a", context, required=True), _number(obj, "b", context, required=True)
        )
    elif kind_name == "indicator_outside_disk":
        kind = IndicatorOutsideDisk(_number(obj, "radius", context, required=True))
    elif kind_name == "indicator_outside_halfplane":
        kind = IndicatorOutsideHalfplane(_number(obj, "threshold", context, required=True))
    else:
        raise ConfigError(f"{context}.kind: unknown constraint kind '{kind_name}'")
    weight = _number(obj, "weight", context, default=1.0)
    if "fbar" in obj and obj["fbar"] is not None:
        fbar = _number(obj, "fbar", context)
    elif "surrogate" in obj:
        tag, surr = parse_prior(obj["surrogate"], f"{context}.surrogate")
        if tag != "spec":
            raise ConfigError(f"{context}.surrogate: must be an analytic prior")
        fbar = target_from_surrogate(kind, surr)
    else:
        raise ConfigError(f"{context}: needs 'fbar' or 'surrogate'")
    return ConstraintSpec(kind=kind, fbar=fbar, weight=weight)


def parse_barrier(obj: dict, context: str = "solver.barrier"):
    _require_keys(
        obj,
        {"lambda_delta", "lambda_0", "t", "m_delta", "m_0", "phi_eps", "domain"},
        context,
    )
    domain = None
    if obj.get("domain") is not None:
        d = obj["domain"]
        _require_keys(d, {"kind", "a", "b", "radius", "threshold"}, f"{context}.domain")
        dk = d.get("kind")
        if dk == "interval":
            domain = IndicatorOutsideInterval(
                _number(d, "a", context, required=True), _number(d, "b", context, required=True)
            )
        elif dk == "disk":
            domain = IndicatorOutsideDisk(_number(d, "radius", context, required=True))
        elif dk == "halfplane":
            domain = IndicatorOutsideHalfplane(_number(d, "threshold", context, required=True))
        else:
            raise ConfigError(f"{context}.domain.kind: unknown domain kind '{dk}'")
    return BarrierConfig(
        lambda_delta=_number(obj, "lambda_delta", context, default=1.0),
        lambda_0=_number(obj, "lambda_0", context, default=1.0),
        t=_number(obj, "t", context, default=0.01),
        m_delta=_number(obj, "m_delta", context),
        m_0=_number(obj, "m_0", context),
        domain=domain,
        phi_eps=_number(obj, "phi_eps", context, default=0.1),
    )


def parse_solver(obj: dict, threads: int):
    _require_keys(
        obj,
        {"eps0", "beta", "outer_rounds", "max_inner", "tol", "armijo_alpha",
         "step_expand", "eta0", "barrier", "bandwidth", "residual_rtol", "threads"},
        "solver",
    )
    barrier = parse_barrier(obj["barrier"]) if obj.get("barrier") else None
    return SolverConfig(
        eps0=_number(obj, "eps0", "solver"),
        beta=_number(obj, "beta", "solver", default=3.0),
        outer_rounds=int(_number(obj, "outer_rounds", "solver", default=8)),
        max_inner=int(_number(obj, "max_inner", "solver", default=5000)),
        tol=_number(obj, "tol", "solver"),
        armijo_alpha=_number(obj, "armijo_alpha", "solver", default=0.3),
        step_expand=_number(obj, "step_expand", "solver", default=0.1),
        eta0=_number(obj, "eta0", "solver", default=1e-2),
        barrier=barrier,
        bandwidth=_number(obj, "bandwidth", "solver"),
        threads=threads if threads is not None else int(_number(obj, "threads", "solver", default=1)),
    )


def parse_option(obj: dict, idx: int, scale: str):
    context = f"pricing.options[{idx}]"
    _require_keys(obj, {"kind", "strike", "barrier", "cash"}, context)
    s = (lambda v: math.exp(v)) if scale == "log" else (lambda v: v)
    kind = obj.get("kind")
    if kind == "vanilla":
        return VanillaCall(s(_number(obj, "strike", context, required=True)))
    if kind == "down_and_out":
        return DownAndOutCall(
            s(_number(obj, "barrier", context, required=True)),
            s(_number(obj, "strike", context, required=True)),
        )
    if kind == "cash_or_nothing":
        return CashOrNothing(
            _number(obj, "cash", context, required=True),
            s(_number(obj, "strike", context, required=True)),
        )
    if kind == "asset_or_nothing":
        return AssetOrNothing(s(_number(obj, "strike", context, required=True)))
    raise ConfigError(f"{context}.kind: unknown option kind '{kind}'")


class RunConfig:
    """Validated run configuration."""

    TOP_KEYS = {
        "seed", "prior", "n", "constraints", "solver", "method", "pricing",
        "kl", "output_dir", "scale",
    }

    def __init__(self, raw: dict, threads: int | None = None, out_dir: str | None = None):
        _require_keys(raw, self.TOP_KEYS, "config")
        self.raw = raw
        self.seed = int(_number(raw, "seed", "config", default=0))
        env_seed = os.environ.get("COT_SEED")
        if env_seed is not None:
            self.seed = int(env_seed)
        self.scale = raw.get("scale", "price")
        if self.scale not in ("price", "log"):
            raise ConfigError("config.scale: must be 'price' or 'log'")
        if "prior" not in raw:
            raise ConfigError("config: missing key 'prior'")
        self.prior_source = parse_prior(raw["prior"])
        self.n = int(_number(raw, "n", "config", default=1000))
        cons_raw = raw.get("constraints", [])
        if not isinstance(cons_raw, list):
            raise ConfigError("config.constraints: expected a list")
        self.constraints = [parse_constraint(c, i, self.scale) for i, c in enumerate(cons_raw)]
        self.solver = parse_solver(raw.get("solver", {}), threads)
        self.residual_rtol = _number(raw.get("solver", {}), "residual_rtol", "solver", default=0.02)
        self.method = raw.get("method", "numeric")
        if self.method not in ("numeric", "analytic", "kl", "all"):
            raise ConfigError("config.method: must be numeric|analytic|kl|all")
        self.kl_y_max = None
        if raw.get("kl"):
            _require_keys(raw["kl"], {"y_max"}, "kl")
            self.kl_y_max = _number(raw["kl"], "y_max", "kl")
        self.pricing = None
        if raw.get("pricing"):
            p = raw["pricing"]
            _require_keys(p, {"options", "surrogate"}, "pricing")
            if "surrogate" not in p:
                raise ConfigError("pricing: missing key 'surrogate'")
            tag, surr = parse_prior(p["surrogate"], "pricing.surrogate")
            if tag != "spec" or not isinstance(surr, Lognormal):
                raise ConfigError("pricing.surrogate: must be a lognormal spec")
            opts = p.get("options", [])
            if not isinstance(opts, list) or not opts:
                raise ConfigError("pricing.options: expected a nonempty list")
            self.pricing = {
                "options": [parse_option(o, i, self.scale) for i, o in enumerate(opts)],
                "surrogate": surr,
            }
        self.output_dir = out_dir or raw.get("output_dir", ".")

    def prior_samples(self) -> EmpiricalMeasure:
        tag, src = self.prior_source
        if tag == "samples":
            return read_samples_csv(src)
        return sample(src, self.n, self.seed)

    def prior_spec(self):
        tag, src = self.prior_source
        return src if tag == "spec" else None


def load_config(path: str, threads: int | None = None, out_dir: str | None = None) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return RunConfig(raw, threads=threads, out_dir=out_dir)


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------


def _atomic_json(path: str, payload: dict) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, default=_jsonable)
        fh.write("\n")
    os.replace(tmp, path)


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "to_jsonable"):
        return obj.to_jsonable()
    if hasattr(obj, "__dataclass_fields__"):
        return asdict(obj)
    return str(obj)


def _manifest(cfg: RunConfig, out_dir: str, t0: float, extra: dict) -> None:
    payload = {
        "version": __version__,
        "config": cfg.raw,
        "seed": cfg.seed,
        "elapsed_seconds": time.time() - t0,
        **extra,
    }
    _atomic_json(os.path.join(out_dir, "manifest.json"), payload)


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _histogram_csv_svg(points: np.ndarray, out_dir: str, name: str, bins: int = 60,
                       lo: float | None = None, hi: float | None = None) -> None:
    lo = float(np.min(points)) if lo is None else lo
    hi = float(np.max(points)) if hi is None else hi
    if hi <= lo:
        hi = lo + 1.0
    counts, edges = np.histogram(points, bins=bins, range=(lo, hi))
    _write_csv(
        os.path.join(out_dir, f"hist_{name}.csv"),
        ["bin_lo", "bin_hi", "count"],
        [[edges[i], edges[i + 1], int(counts[i])] for i in range(bins)],
    )
    _write_svg_hist(os.path.join(out_dir, f"hist_{name}.svg"), counts, edges, name)


def _write_svg_hist(path: str, counts: np.ndarray, edges: np.ndarray, title: str) -> None:
    width, height, pad = 640, 360, 40
    peak = max(int(np.max(counts)), 1)
    n = len(counts)
    bar_w = (width - 2 * pad) / n
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width/2:.0f}" y="18" text-anchor="middle" font-size="13">{title}</text>',
        f'<line x1="{pad}" y1="{height-pad}" x2="{width-pad}" y2="{height-pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height-pad}" stroke="black"/>',
    ]
    for i, c in enumerate(counts):
        h = (height - 2 * pad) * (int(c) / peak)
        x = pad + i * bar_w
        y = height - pad - h
        parts.append(
            f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w:.2f}" height="{h:.2f}" '
            f'fill="steelblue" stroke="none"/>'
        )
    for frac in (0.0, 0.5, 1.0):
        xval = edges[0] + frac * (edges[-1] - edges[0])
        xpix = pad + frac * (width - 2 * pad)
        parts.append(
            f'<text x="{xpix:.0f}" y="{height-pad+16}" text-anchor="middle" font-size="11">{xval:.3g}</text>'
        )
    parts.append(f'<text x="{pad-6}" y="{pad}" text-anchor="end" font-size="11">{peak}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts))


def _density_grid_csv(out_dir: str, xs: np.ndarray, dens: np.ndarray) -> None:
    _write_csv(
        os.path.join(out_dir, "density.csv"),
        ["y", "density"],
        [[float(a), float(b)] for a, b in zip(xs, dens)],
    )


def _density_grid(prior, solution, n_points: int = 2048) -> np.ndarray:
    if isinstance(prior, Lognormal):
        lo = float(prior.quantile(1e-6))
        hi = float(prior.quantile(1.0 - 1e-6)) * 1.5
        return np.exp(np.linspace(math.log(lo), math.log(hi), n_points))
    if isinstance(prior, Normal1D):
        return np.linspace(prior.mu - 6 * prior.sigma, prior.mu + 6 * prior.sigma, n_points)
    if hasattr(prior, "points"):
        lo, hi = float(np.min(prior.points)), float(np.max(prior.points))
        pad = 0.5 * (hi - lo) + 1e-6
        return np.linspace(lo - pad, hi + pad, n_points)
    return np.linspace(-5.0, 5.0, n_points)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_estimate(cfg: RunConfig) -> int:
    t0 = time.time()
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    x = cfg.prior_samples()
    result = run(x, cfg.constraints, cfg.solver)
    write_samples_csv(result.y, os.path.join(out, "y.csv"))
    _atomic_json(os.path.join(out, "trace.json"), {"trace": result.trace_jsonable()})
    final = result.residuals[-1] if result.residuals else []
    bad = _residuals_above_tol(final, cfg.constraints, cfg.residual_rtol)
    _manifest(cfg, out, t0, {
        "command": "estimate",
        "resolved_solver": result.config,
        "transport_cost": result.transport_cost,
        "residuals": final,
        "converged": result.converged,
        "warnings": result.warnings + (["residuals above tolerance"] if bad else []),
    })
    return 2 if bad else 0


def _residuals_above_tol(residuals, constraints, rtol: float) -> bool:
    for r, spec in zip(residuals, constraints):
        tol = max(rtol * abs(spec.fbar), rtol * 0.5)
        if abs(r) > tol:
            return True
    return False


def cmd_analytic(cfg: RunConfig) -> int:
    t0 = time.time()
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    prior = cfg.prior_spec()
    if prior is None:
        prior = cfg.prior_samples().as_discrete_prior()
    kinds = [c.kind for c in cfg.constraints]
    try:
        if all(isinstance(k, Relu) for k in kinds) and kinds:
            mp, measure, cost, states = solve_relu_multi(
                prior, [k.omega for k in kinds], [c.fbar for c in cfg.constraints]
            )
            solution = {"map": mp.to_jsonable(), "measure": measure.to_jsonable(), "cost": cost}
            resid = [
                measure.expectation(lambda y, om=k.omega: np.maximum(y - om, 0.0), kinks=[k.omega]) - c.fbar
                for k, c in zip(kinds, cfg.constraints)
            ]
        elif len(kinds) == 1 and isinstance(kinds[0], IndicatorOutsideInterval):
            measure, mp = solve_indicator_interval(prior, kinds[0].a, kinds[0].b)
            cost = None
            solution = {"map": mp.to_jsonable(), "measure": measure.to_jsonable()}
            resid = [0.0]
        elif len(kinds) == 1 and isinstance(kinds[0], IndicatorOutsideDisk):
            measure, mp = solve_indicator_disk(prior, kinds[0].radius)
            solution = {"measure": measure.to_jsonable(), "alpha": measure.alpha}
            resid = [0.0]
        elif len(kinds) == 1 and isinstance(kinds[0], IndicatorOutsideHalfplane):
            measure, mp = solve_indicator_halfplane(prior, kinds[0].threshold)
            solution = {"measure": measure.to_jsonable(), "alpha": measure.alpha}
            resid = [0.0]
        else:
            raise ConfigError("analytic: constraints must be all-relu or one indicator kind")
    except InfeasibleTargets as exc:
        _manifest(cfg, out, t0, {"command": "analytic", "error": str(exc), "segment": exc.segment})
        print(f"error: infeasible targets at segment {exc.segment}", file=sys.stderr)
        return 2
    _atomic_json(os.path.join(out, "solution.json"), solution)
    if isinstance(measure, MixedMeasure):
        xs = _density_grid(prior, measure)
        _density_grid_csv(out, xs, measure.density(xs))
    else:
        # boundary marginal of the projected 2D measure
        ss = (
            np.linspace(0.0, 2 * math.pi, 2048)
            if measure.region == "disk"
            else np.linspace(-6.0, 6.0, 2048)
        )
        _density_grid_csv(out, ss, measure.boundary_density(ss))
    _manifest(cfg, out, t0, {"command": "analytic", "residuals": resid,
                             "cost": solution.get("cost"), "warnings": []})
    return 0


def cmd_kl(cfg: RunConfig) -> int:
    t0 = time.time()
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    prior = cfg.prior_spec()
    if prior is None:
        x = cfg.prior_samples()
        logx = np.log(x.x1())
        prior = Lognormal(float(np.mean(logx)), float(np.std(logx, ddof=1)))
    kinds = [c.kind for c in cfg.constraints]
    try:
        if len(kinds) == 1 and isinstance(kinds[0], IndicatorOutsideInterval):
            sol = kl_indicator(prior, kinds[0].a, kinds[0].b)
        elif kinds and all(isinstance(k, Relu) for k in kinds):
            sol = kl_relu_multi(prior, [k.omega for k in kinds],
                                [c.fbar for c in cfg.constraints], cfg.kl_y_max)
        else:
            raise ConfigError("kl: constraints must be all-relu or one interval indicator")
    except ZeroMass as exc:
        _manifest(cfg, out, t0, {"command": "kl", "error": f"ZeroMass: {exc}"})
        print(f"error: ZeroMass: {exc}", file=sys.stderr)
        return 2
    _atomic_json(os.path.join(out, "solution.json"), sol.to_jsonable())
    xs = _density_grid(prior, sol)
    _density_grid_csv(out, xs, np.asarray(kl_density(sol, xs)))
    extra = {"command": "kl", "warnings": []}
    if sol.kind == "relu":
        extra["y_max"] = sol.y_max
        extra["lambdas"] = list(sol.lambdas)
    _manifest(cfg, out, t0, extra)
    return 0


def _price_rows(rep) -> tuple[list[list], list[list]]:
    prices, errors = [], []
    for row in rep.rows():
        params = json.dumps(row["params"], sort_keys=True)
        prices.append([row["option"], params, row["method"], row["price"], row["rel_error"]])
        errors.append([row["option"], params, row["method"], row["rel_error"]])
    return prices, errors


def cmd_price(cfg: RunConfig) -> int:
    t0 = time.time()
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    if cfg.pricing is None:
        raise ConfigError("price: config needs a pricing section")
    options = cfg.pricing["options"]
    surrogate = cfg.pricing["surrogate"]
    prior = cfg.prior_spec()
    if isinstance(prior, Lognormal):
        rows_p, rows_e = [], []
        for i, opt in enumerate(options):
            ref = closed_form_price(opt, surrogate)
            p = closed_form_price(opt, prior)
            params = json.dumps(_params_of(opt), sort_keys=True)
            rows_p.append([type(opt).__name__, params, "prior", p, (p - ref) / ref])
            rows_e.append([type(opt).__name__, params, "prior", (p - ref) / ref])
        _write_csv(os.path.join(out, "prices.csv"),
                   ["option", "param_set", "method", "price", "rel_error"], rows_p)
        _write_csv(os.path.join(out, "errors.csv"),
                   ["option", "param_set", "method", "rel_error"], rows_e)
    else:
        x = cfg.prior_samples()
        rep = report(options, {"prior": x}, surrogate)
        rows_p, rows_e = _price_rows(rep)
        _write_csv(os.path.join(out, "prices.csv"),
                   ["option", "param_set", "method", "price", "rel_error"], rows_p)
        _write_csv(os.path.join(out, "errors.csv"),
                   ["option", "param_set", "method", "rel_error"], rows_e)
    _manifest(cfg, out, t0, {"command": "price", "warnings": []})
    return 0


def _params_of(opt) -> dict:
    return {k: getattr(opt, k) for k in opt.__dataclass_fields__}


def cmd_compare(cfg: RunConfig) -> int:
    t0 = time.time()
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    if cfg.pricing is None:
        raise ConfigError("compare: config needs a pricing section")
    if not cfg.constraints or not all(isinstance(c.kind, Relu) for c in cfg.constraints):
        raise ConfigError("compare: constraints must be vanilla-call quotes (relu)")
    options = cfg.pricing["options"]
    surrogate = cfg.pricing["surrogate"]
    x = cfg.prior_samples()
    quotes = [(c.kind.omega, c.fbar) for c in cfg.constraints]
    measures = {"prior": x}
    measures["wasserstein"] = calibrate(x, quotes, "ot", cfg.solver)
    measures["smooth_wasserstein"] = calibrate(x, quotes, "ot_smooth", cfg.solver)
    measures["kl"] = calibrate(x, quotes, "kl", y_max=cfg.kl_y_max)
    rep = report(options, measures, surrogate)
    rows_p, rows_e = _price_rows(rep)
    _write_csv(os.path.join(out, "prices.csv"),
               ["option", "param_set", "method", "price", "rel_error"], rows_p)
    _write_csv(os.path.join(out, "errors.csv"),
               ["option", "param_set", "method", "rel_error"], rows_e)
    lo = float(np.quantile(x.x1(), 0.001))
    hi = float(np.quantile(x.x1(), 0.999)) * 2.0
    for name, m in measures.items():
        pts = m.x1() if isinstance(m, EmpiricalMeasure) else kl_sample(m, x.n, cfg.seed).x1()
        write_samples_csv(
            EmpiricalMeasure(points=pts.reshape(-1, 1)), os.path.join(out, f"y_{name}.csv")
        )
        _histogram_csv_svg(pts, out, name, lo=lo, hi=hi)
    surr_pts = sample(surrogate, x.n, cfg.seed).x1()
    _histogram_csv_svg(surr_pts, out, "surrogate", lo=lo, hi=hi)
    _manifest(cfg, out, t0, {"command": "compare", "methods": list(measures), "warnings": []})
    return 0


def cmd_gen_samples(cfg: RunConfig) -> int:
    t0 = time.time()
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    prior = cfg.prior_spec()
    if prior is None:
        raise ConfigError("gen-samples: config prior must be an analytic spec")
    m = sample(prior, cfg.n, cfg.seed)
    write_samples_csv(m, os.path.join(out, "samples.csv"))
    _manifest(cfg, out, t0, {"command": "gen-samples", "n": cfg.n, "warnings": []})
    return 0


COMMANDS = {
    "estimate": cmd_estimate,
    "analytic": cmd_analytic,
    "kl": cmd_kl,
    "price": cmd_price,
    "compare": cmd_compare,
    "gen-samples": cmd_gen_samples,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="cot",
        description="Constrained-transport density estimation and option calibration",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="path to the JSON run config")
    parser.add_argument("--threads", type=int, default=None, help="solver kernel threads")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, threads=args.threads, out_dir=args.out)
        return COMMANDS[args.command](cfg)
    except CotError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
