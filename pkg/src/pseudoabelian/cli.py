"""Command-line front end.

    pseudoabelian <subcommand> --scenario FILE [--out DIR] [--jobs N] [--no-cache] [--plots]

Subcommands: trace, integrate, var, compensator, diffsolve, count,
asymptotics, check.  A scenario is a JSON file naming the system, the
one-form, the parameters and per-subcommand controls.  Each run writes
CSV tables, a ``<subcommand>_summary.json`` with every tolerance echoed
and, with ``--plots``, SVG figures.  Numbers are written with 17
significant digits (CSV) or shortest round-trip form (JSON), so reruns
are byte-identical.

Results are cached under ``$PSEUDOABELIAN_CACHE`` (default
``~/.cache/pseudoabelian``), keyed by a hash of the subcommand, the
scenario, the system file contents and the package version.

Exit codes: 0 success, 1 numerical failure (or a failed check), 2
configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, NumericalError, PseudoAbelianError

CACHE_ENV = "PSEUDOABELIAN_CACHE"
SUBCOMMANDS = ("trace", "integrate", "var", "compensator", "diffsolve", "count", "asymptotics", "check")


# --- formatting -------------------------------------------------------------------

def fmt(v) -> str:
    """CSV cell: integers as is, reals with 17 significant digits, complex as ``a+bj``."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (complex, np.complexfloating)):
        z = complex(v)
        if z.imag == 0:
            return f"{z.real:.17g}"
        return f"{z.real:.17g}{z.imag:+.17g}j"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def jsonable(obj):
    """Plain JSON types; complex numbers become ``[re, im]``, non-finite floats strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [jsonable(complex(obj).real), jsonable(complex(obj).imag)]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=1, sort_keys=True, allow_nan=False) + "\n"


def table(columns, rows) -> dict:
    return {"columns": list(columns), "rows": [[fmt(v) for v in r] for r in rows]}


def _split(z):
    z = np.asarray(z, dtype=complex)
    return {"re": z.real.tolist(), "im": z.imag.tolist()}


def _join(d):
    return np.asarray(d["re"]) + 1j * np.asarray(d["im"])


# --- scenario ---------------------------------------------------------------------

class Scenario:
    """Parsed scenario file; see the module docstring for the layout."""

    def __init__(self, path):
        from .darboux import DarbouxSystem, OneForm, UnfoldingParams, triangle_system
        from .polynomial import BivariatePoly

        self.path = Path(path)
        try:
            self.text = self.path.read_text()
            self.data = json.loads(self.text)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read scenario {path}: {exc}", operation="load_scenario") from exc
        if not isinstance(self.data, dict):
            raise ConfigError("scenario must be a JSON object", operation="load_scenario")
        ref = self.data.get("system", "triangle")
        if ref == "triangle":
            self.system = triangle_system()
            self.system_text = json.dumps(self.system.to_json(), sort_keys=True)
        else:
            f = (self.path.parent / ref).resolve()
            if not f.is_file():
                raise ConfigError(f"system file {f} does not exist", operation="load_scenario")
            self.system_text = f.read_text()
            self.system = DarbouxSystem.load(f)
        eta = self.data.get("eta")
        try:
            if eta is None:
                self.eta = OneForm(BivariatePoly.y(), BivariatePoly.const(0.0))
            else:
                self.eta = OneForm(BivariatePoly.from_terms(eta.get("a", [])),
                                   BivariatePoly.from_terms(eta.get("b", [])))
            p = self.data.get("params", {})
            self.params = UnfoldingParams(float(p.get("eps", 0.0)), float(p.get("alpha", 0.0))).check()
        except (TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(f"malformed eta or params: {exc}", operation="load_scenario") from exc
        self.out = self.data.get("out", "results")

    def section(self, name: str) -> dict:
        s = self.data.get(name, {})
        if not isinstance(s, dict):
            raise ConfigError(f"section {name!r} must be an object", operation="load_scenario")
        return s


def _positive(cfg: dict, key: str, default, kind=float):
    v = cfg.get(key, default)
    try:
        v = kind(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must be a number: {v!r}", operation="load_scenario") from exc
    if not v > 0 or (isinstance(v, float) and not math.isfinite(v)):
        raise ConfigError(f"{key} must be positive, got {v}", operation="load_scenario")
    return v


def _grid(cfg: dict, key: str, default) -> list[float]:
    v = cfg.get(key, default)
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{key} must be a nonempty list", operation="load_scenario")
    try:
        out = [float(x) for x in v]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must contain numbers", operation="load_scenario") from exc
    if not all(math.isfinite(x) for x in out):
        raise ConfigError(f"{key} must contain finite numbers", operation="load_scenario")
    return out


# --- subcommands ------------------------------------------------------------------
# Each returns a payload: {"tables": {file: table}, "summary": {...}, "plot": {...}, "status": "ok"|"fail"}.

def run_trace(sc: Scenario, jobs: int) -> dict:
    from .cycles import cycle_length, shoelace_area
    from .foliation import darboux_foliation
    from .integrator import h_grid
    from .tracer import interior_extremum, trace_ovals

    cfg = sc.section("trace")
    nest = interior_extremum(sc.system, sc.params)
    hs = _grid(cfg, "h", []) if "h" in cfg else h_grid(nest.b, _positive(cfg, "n", 6, int),
                                                       h_min=_positive(cfg, "h_min_frac", 1e-3) * nest.b).tolist()
    cycles = trace_ovals(sc.system, sc.params, hs, nest=nest)
    fol = darboux_foliation(sc.system, sc.params)
    rows, info, ovals = [], [], []
    for h, c in zip(hs, cycles):
        pts = c.points.real
        for i, (x, y) in enumerate(pts):
            rows.append((h, i, x, y))
        info.append({"h": h, "markers": c.n, "level_residual": c.level_residual(fol),
                     "length": cycle_length(c), "area": shoelace_area(c)})
        ovals.append({"h": h, "x": pts[:, 0].tolist(), "y": pts[:, 1].tolist()})
    summary = {"center": list(nest.center), "b": nest.b, "ovals": info}
    return {"tables": {"trace_ovals.csv": table(("h", "index", "x", "y"), rows)}, "summary": summary,
            "tolerances": {"level_tol": 1e-13}, "plot": {"ovals": ovals}, "status": "ok"}


def run_integrate(sc: Scenario, jobs: int) -> dict:
    from .integrator import sweep
    from .tracer import interior_extremum

    cfg = sc.section("integrate")
    n = _positive(cfg, "n", 50, int)
    h_min_frac = _positive(cfg, "h_min_frac", 1e-6)
    rtol = _positive(cfg, "rtol", 1e-12)
    nest = interior_extremum(sc.system, sc.params)
    res = sweep(sc.system, sc.params, sc.eta, n=n, h_min=h_min_frac * nest.b, rtol=rtol, jobs=jobs, nest=nest)
    rows = list(zip(res.h_samples, res.i_values, res.errors))
    summary = {"zero_count": res.zero_count, "zeros": res.zeros, "b": res.b,
               "min_reachable_h": res.min_reachable_h, "zero_threshold": res.zero_threshold,
               "params": sc.params.as_dict()}
    return {"tables": {"integrate.csv": table(("h", "I", "err_estimate"), rows)}, "summary": summary,
            "tolerances": {"rtol": rtol, "zero_rel": 1e-12, "zero_l1": 1e-9},
            "plot": {"h": res.h_samples.tolist(), "I": res.i_values.tolist(), "zeros": res.zeros},
            "status": "ok"}


def run_var(sc: Scenario, jobs: int) -> dict:
    from .tracer import interior_extremum
    from .transport import VarSpec
    from .zeros import _laurent_matrix, variation_fit

    cfg = sc.section("var")
    residues = _grid(cfg, "residues", [1.0, 1.0])
    n = _positive(cfg, "n", 24, int)
    lo = _positive(cfg, "h_min_frac", 1e-4)
    hi = _positive(cfg, "h_max_frac", 0.8)
    kappa = _positive(cfg, "kappa", 0.05)
    tol = _positive(cfg, "tolerance", 1e-2)
    max_degree = int(cfg.get("max_degree", 8))
    pole = int(cfg.get("pole_order", 1))
    nest = interior_extremum(sc.system, sc.params)
    hs = np.geomspace(lo * nest.b, hi * nest.b, n)
    fit = variation_fit(sc.system, sc.params, sc.eta, VarSpec(residues), hs, degrees=range(max_degree + 1),
                        pole_order=pole, tolerance=tol, kappa=kappa, jobs=jobs)
    fitted = np.full(len(hs), np.nan + 0j)
    if fit.coefficients is not None:
        scale = float(np.max(np.abs(fit.w)))
        fitted = _laurent_matrix(fit.w, pole, fit.degree, scale) @ fit.coefficients
    rows = [(h, w, v.real, v.imag, f.real, f.imag) for h, w, v, f in zip(hs, fit.w, fit.values, fitted)]
    summary = {"residues": residues, "params": sc.params.as_dict(), "fit": fit.as_dict(),
               "coefficients_scaled": None if fit.coefficients is None else fit.coefficients,
               "w_scale": float(np.max(np.abs(fit.w)))}
    status = "ok" if fit.degree is not None and fit.monotone and fit.split_agrees else "fail"
    return {"tables": {"var.csv": table(("h", "w", "re_V", "im_V", "re_fit", "im_fit"), rows)},
            "summary": summary, "tolerances": {"fit": tol, "kappa": kappa},
            "plot": {"w": fit.w.tolist(), "V": _split(fit.values), "fit": _split(fitted)}, "status": status}


def run_compensator(sc: Scenario, jobs: int) -> dict:
    from .compensator import defining_residual, omega_chart, omega_closed, omega_ode, omega_root, pfaffian_residual

    cfg = sc.section("compensator")
    hs = _grid(cfg, "h", [round(0.05 * k, 2) for k in range(1, 20)])
    eps_grid = _grid(cfg, "eps", [0.0, 0.05, 0.1, 0.2])
    alpha_grid = _grid(cfg, "alpha", [-0.1, 0.0, 0.1])
    tol = _positive(cfg, "tolerance", 1e-8)
    closed_tol = _positive(cfg, "closed_form_tolerance", 1e-10)
    pf_tol = _positive(cfg, "pfaffian_tolerance", 1e-8)
    rows = []
    pair = closed = pf = 0.0
    curves = {}
    for e in eps_grid:
        for a in alpha_grid:
            vals = []
            for h in hs:
                r = omega_root(h, e, a)
                o = omega_ode(h, e, a)
                c = omega_chart(h, e, a).omega
                pair = max(pair, abs(r - o), abs(r - c), abs(o - c))
                if a == 0:
                    closed = max(closed, abs(r - omega_closed(h, e)))
                if not isinstance(r, complex):
                    pf = max(pf, pfaffian_residual(lambda t: omega_root(t, e, a), h, e, a))
                rows.append((h, e, a, r, o, defining_residual(r, h, e, a)))
                vals.append(r)
            curves[f"eps={e:g}, alpha={a:g}"] = _split(vals)
    summary = {"max_pairwise": pair, "max_closed_form_error": closed, "max_pfaffian_residual": pf,
               "cells": len(eps_grid) * len(alpha_grid), "h_samples": len(hs)}
    ok = pair < tol and closed < closed_tol and pf < pf_tol
    return {"tables": {"compensator.csv": table(("h", "eps", "alpha", "omega_root", "omega_ode", "abs_residual"),
                                                rows)},
            "summary": summary,
            "tolerances": {"pairwise": tol, "closed_form": closed_tol, "pfaffian": pf_tol},
            "plot": {"h": hs, "curves": curves}, "status": "ok" if ok else "fail"}


def run_diffsolve(sc: Scenario, jobs: int) -> dict:
    from .difference import (HalfPlaneFn, LogChartPoly, delta, delta_iter, fit_decay_exponent, iterated_sum,
                             ray, solve_delta)

    cfg = sc.section("diffsolve")
    residues = _grid(cfg, "residues", [1.0])
    A = _positive(cfg, "A", 4.0)
    p = LogChartPoly.from_json(json.dumps(cfg.get("f", [[-2, 0, 1.0, 0.0]])))
    power = _positive(cfg, "sum_power", 3.0)
    u0 = complex(cfg.get("u", -50.0))
    t = np.geomspace(_positive(cfg, "t_min", 10.0), _positive(cfg, "t_max", 1e4), _positive(cfg, "t_n", 13, int))
    P = solve_delta(p, residues, A)
    us = ray(t, 1)
    resid = np.abs(p(us) - delta_iter(P, us, residues))
    floor = 1e-14 * np.abs(p(us))
    res_exp = fit_decay_exponent(np.maximum(resid, floor), t)
    f = HalfPlaneFn.power(power)
    k = len(residues)
    Fp = lambda v: np.array([iterated_sum(f, residues, 1, x).value for x in np.atleast_1d(v)])
    d = delta_iter(Fp, np.array([u0]), residues, L=f.L)[0] if k > 1 else delta(Fp, np.array([u0]), residues[0],
                                                                                  L=f.L)[0]
    delta_err = abs(d - f(u0)) / abs(f(u0))
    F_ray = np.array([iterated_sum(f, residues, 1, x).value for x in us])
    decay = fit_decay_exponent(np.abs(F_ray), t)
    rows = list(zip(t, resid, np.abs(F_ray)))
    summary = {"solution": json.loads(P.to_json()), "residual_decay_exponent": res_exp, "A": A,
               "sum_power": power, "u": u0, "delta_relative_error": delta_err,
               "F_plus_decay_exponent": decay, "expected_decay": power - k, "residues": residues}
    ok = delta_err < 1e-8 and abs(decay - (power - k)) < 0.15
    return {"tables": {"diffsolve.csv": table(("t", "abs_residual", "abs_F_plus"), rows)}, "summary": summary,
            "tolerances": {"delta": 1e-8, "decay": 0.15},
            "plot": {"t": t.tolist(), "F": np.abs(F_ray).tolist()}, "status": "ok" if ok else "fail"}


def run_count(sc: Scenario, jobs: int) -> dict:
    from .zeros import uniformity_experiment

    cfg = sc.section("count")
    eps_grid = _grid(cfg, "eps", np.linspace(0.0, 0.1, 5).tolist())
    alpha_grid = _grid(cfg, "alpha", np.linspace(-0.05, 0.05, 5).tolist())
    n_h = _positive(cfg, "n_h", 30, int)
    refine = _positive(cfg, "refine", 2, int)
    h_min_frac = _positive(cfg, "h_min_frac", 1e-6)
    tab = uniformity_experiment(sc.system, sc.eta, eps_grid, alpha_grid, n_h=n_h, refine=refine,
                                h_min_frac=h_min_frac, jobs=jobs)
    rows = [(e, a, c, b, hm, cr) for e, a, c, cr, b, hm in tab.rows]
    summary = {"max_count": tab.max_count, "max_count_refined": tab.max_count_refined, "stable": tab.stable,
               "n_h": n_h, "refine": refine}
    return {"tables": {"count.csv": table(("eps", "alpha", "zero_count", "b", "min_reachable_h",
                                           "zero_count_refined"), rows)},
            "summary": summary, "tolerances": {"h_min_frac": h_min_frac, "zero_rel": 1e-12, "zero_l1": 1e-9},
            "plot": {"eps": eps_grid, "alpha": alpha_grid, "counts": [r[2] for r in tab.rows]},
            "status": "ok" if tab.stable else "fail"}


def run_asymptotics(sc: Scenario, jobs: int) -> dict:
    from .integrator import sweep
    from .tracer import interior_extremum
    from .zeros import CLASSIFY_THRESHOLD, fit_leading_term, growth_exponent, integral_on_arc, leading_term_values, \
        small_arc_check

    cfg = sc.section("asymptotics")
    n = _positive(cfg, "n", 24, int)
    lo = _positive(cfg, "h_min_frac", 1e-6)
    hi = _positive(cfg, "h_max_frac", 1e-2)
    thr = _positive(cfg, "threshold", CLASSIFY_THRESHOLD)
    nest = interior_extremum(sc.system, sc.params)
    hs = np.geomspace(lo * nest.b, hi * nest.b, n)
    res = sweep(sc.system, sc.params, sc.eta, hs, refine=False, jobs=jobs, nest=nest)
    fit = fit_leading_term(res.h_samples, res.i_values, threshold=thr)
    growth = growth_exponent(res.h_samples[::-1], res.i_values[::-1])
    summary = {"fit": fit.as_dict(), "growth": {"N": growth.N, "stderr": growth.stderr, "band": growth.band}}
    status = "ok"
    if cfg.get("arc", False):
        r = _positive(cfg, "arc_radius_frac", 1e-3) * nest.b
        arc = integral_on_arc(sc.system, sc.params, sc.eta, r, nest=nest)
        ok, bound = small_arc_check(arc.increment, growth)
        summary["arc"] = {"radius": r, "increment": arc.increment, "bound": bound, "holds": ok}
        status = "ok" if ok else "fail"
    model = fit.model if fit.model != "unclassified" else (fit.candidates[0][0] if fit.candidates else "power_log")
    mv = leading_term_values(model, res.h_samples, alpha=fit.alpha, k=fit.k, l=fit.l, coefficient=fit.coefficient)
    rows = list(zip(res.h_samples, res.i_values, mv))
    return {"tables": {"asymptotics.csv": table(("h", "I", "leading_term"), rows)}, "summary": summary,
            "tolerances": {"classify": thr, "growth_margin": 0.5},
            "plot": {"h": res.h_samples.tolist(), "I": res.i_values.tolist(), "model": mv.tolist()},
            "status": status}


def run_check(sc: Scenario, jobs: int) -> dict:
    from .checks import invariant_suite

    cfg = sc.section("check")
    points = _positive(cfg, "points", 1000, int)
    tol = _positive(cfg, "tolerance", 1e-9)
    ex_tol = _positive(cfg, "exact_tolerance", 1e-7)
    rep = invariant_suite(sc.system, sc.params, points=points, seed=int(cfg.get("seed", 0)), identity_tol=tol,
                          exact_tol=ex_tol)
    rows = [("dH_minus_H_theta", rep.first_integral["dH_minus_H_theta"], tol),
            ("dH_of_field", rep.first_integral["dH_of_field"], tol),
            ("exact_form", rep.exact_forms["max_relative"], ex_tol),
            ("genericity", 0.0 if rep.genericity["passed"] else 1.0, 0.5)]
    return {"tables": {"check.csv": table(("check", "value", "tolerance"), rows)}, "summary": rep.as_dict(),
            "tolerances": rep.tolerances, "plot": {}, "status": "ok" if rep.passed else "fail"}


RUNNERS = {
    "trace": run_trace,
    "integrate": run_integrate,
    "var": run_var,
    "compensator": run_compensator,
    "diffsolve": run_diffsolve,
    "count": run_count,
    "asymptotics": run_asymptotics,
    "check": run_check,
}


# --- plots ------------------------------------------------------------------------

def write_plots(sub: str, payload: dict, out: Path) -> list[str]:
    from . import plotting as pl

    d = payload["plot"]
    name = out / f"{sub}.svg"
    if sub == "trace":
        pl.plot_ovals([(o["h"], np.column_stack([o["x"], o["y"]])) for o in d["ovals"]], name)
    elif sub == "integrate":
        pl.plot_integral(d["h"], d["I"], d["zeros"], name)
    elif sub == "var":
        pl.plot_variation_fit(d["w"], _join(d["V"]), _join(d["fit"]), name)
    elif sub == "compensator":
        pl.plot_compensator(d["h"], {k: _join(v) for k, v in d["curves"].items()}, name)
    elif sub == "diffsolve":
        pl.plot_decay(d["t"], d["F"], name)
    elif sub == "count":
        pl.plot_uniformity(d["eps"], d["alpha"], d["counts"], name)
    elif sub == "asymptotics":
        pl.plot_leading_term(d["h"], d["I"], d["model"], name)
    else:
        return []
    return [name.name]


# --- cache and driver ---------------------------------------------------------------

def cache_dir() -> Path:
    return Path(os.environ.get(CACHE_ENV, Path.home() / ".cache" / "pseudoabelian"))


def cache_key(sub: str, sc: Scenario) -> str:
    blob = json.dumps({"sub": sub, "scenario": sc.data, "system": sc.system_text, "version": __version__},
                      sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def compute(sub: str, sc: Scenario, jobs: int, use_cache: bool) -> tuple[dict, bool]:
    key = cache_key(sub, sc)
    f = cache_dir() / f"{key}.json"
    if use_cache and f.is_file():
        try:
            return json.loads(f.read_text()), True
        except json.JSONDecodeError:
            pass
    payload = json.loads(dumps(RUNNERS[sub](sc, jobs)))
    if use_cache:
        try:
            _atomic_write(f, dumps(payload))
        except OSError as exc:
            print(f"warning: cache not written: {exc}", file=sys.stderr)
    return payload, False


def write_artifacts(sub: str, payload: dict, sc: Scenario, out: Path, plots: bool) -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for fname, t in payload["tables"].items():
        lines = [",".join(t["columns"])] + [",".join(r) for r in t["rows"]]
        (out / fname).write_text("\n".join(lines) + "\n")
        names.append(fname)
    if plots:
        names += write_plots(sub, payload, out)
    summary = {
        "subcommand": sub,
        "status": payload["status"],
        "scenario": sc.path.name,
        "scenario_sha256": hashlib.sha256(sc.text.encode()).hexdigest(),
        "system_sha256": hashlib.sha256(sc.system_text.encode()).hexdigest(),
        "version": __version__,
        "tolerances": payload["tolerances"],
        "results": payload["summary"],
        "artifacts": sorted(names),
    }
    (out / f"{sub}_summary.json").write_text(dumps(summary))
    return names


def _raising_module(exc: BaseException) -> str:
    """Innermost module of this package in the traceback."""
    name = "cli"
    tb = exc.__traceback__
    while tb is not None:
        mod = tb.tb_frame.f_globals.get("__name__", "")
        if mod.startswith(__package__ + "."):
            name = mod.rsplit(".", 1)[-1]
        tb = tb.tb_next
    return name


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pseudoabelian", description=__doc__.split("\n\n")[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--scenario", required=True, help="scenario JSON file")
    ap.add_argument("--out", help="output directory (overrides the scenario's 'out')")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes")
    ap.add_argument("--no-cache", action="store_true", help="neither read nor write the results cache")
    ap.add_argument("--plots", action="store_true", help="also write SVG figures")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    sub = args.subcommand
    try:
        if args.jobs < 1:
            raise ConfigError(f"--jobs must be at least 1, got {args.jobs}")
        sc = Scenario(args.scenario)
        out = Path(args.out) if args.out else (sc.path.parent / sc.out)
        payload, hit = compute(sub, sc, args.jobs, not args.no_cache)
        names = write_artifacts(sub, payload, sc, out, args.plots)
    except PseudoAbelianError as exc:
        kind = "configuration" if isinstance(exc, ConfigError) else "numerical"
        where = f"{_raising_module(exc)}.{exc.operation or '?'}"
        print(f"{kind} error in {sub} [{where}] {type(exc).__name__}: {exc}", file=sys.stderr)
        if exc.data is not None:
            print(f"  input: {json.dumps(jsonable(exc.data), sort_keys=True)}", file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical error in {sub} [{_raising_module(exc)}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"{sub}: {payload['status']} ({'cached' if hit else 'computed'}); wrote {', '.join(sorted(names))} "
          f"and {sub}_summary.json to {out}")
    return 0 if payload["status"] == "ok" else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
