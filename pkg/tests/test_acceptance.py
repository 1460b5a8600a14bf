"""One test per acceptance criterion; each prints a single PASS/FAIL line."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from oracles import roots_in_sector, stokes_interior_integral
from forms import CUBIC, X2_DY, Y_DX, form
from pseudoabelian.checks import default_exact_potentials, first_integral_residuals
from pseudoabelian.compensator import (
    eps_continuity,
    omega_chart,
    omega_closed,
    omega_ode,
    omega_root,
    pfaffian_residual,
)
from pseudoabelian.cycles import cycle_deviation, cycle_length
from pseudoabelian.darboux import OneForm, UnfoldingParams
from pseudoabelian.difference import (
    HalfPlaneFn,
    LogChartPoly,
    delta,
    differentiate_logchart,
    fit_decay_exponent,
    integrate_logchart,
    iterated_sum,
    ray,
)
from pseudoabelian.foliation import darboux_foliation
from pseudoabelian.integrator import h_grid, integral_detailed, pseudo_abelian_integral
from pseudoabelian.models import SaddleModel, random_inward_path, saddle_model_transport_check
from pseudoabelian.tracer import interior_extremum, trace_oval
from pseudoabelian.transport import (
    HPath,
    VarSpec,
    continue_cycle,
    iterated_var,
    iterated_var_samples,
    var_integral,
    var_scalar,
)
from pseudoabelian.zeros import (
    SectorContour,
    fit_leading_term,
    growth_exponent,
    integral_on_arc,
    leading_term_values,
    sector_zero_count,
    small_arc_check,
    uniformity_experiment,
    variation_fit,
)

CELLS = [UnfoldingParams(e, a) for e in (0.0, 0.05, 0.1) for a in (-0.05, 0.0, 0.05)]


def verdict(report, n, ok, detail):
    report(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_c01_first_integral_identities(tri, report):
    worst = {"dH_minus_H_theta": 0.0, "dH_of_field": 0.0}
    for params in (UnfoldingParams(0.0, 0.0), UnfoldingParams(0.1, 0.05)):
        r = first_integral_residuals(tri, params, n=1000, seed=1)
        assert r["points"] == 1000
        for key in worst:
            worst[key] = max(worst[key], r[key])
    ok = worst["dH_minus_H_theta"] < 1e-9 and worst["dH_of_field"] < 1e-9
    verdict(report, 1, ok, f"dH-H*theta {worst['dH_minus_H_theta']:.2e}, dH(v) {worst['dH_of_field']:.2e} (< 1e-9)")


@pytest.mark.slow
def test_c02_exact_forms_vanish(tri, report):
    worst = 0.0
    for params in CELLS:
        nest = interior_extremum(tri, params)
        m = tri.integrating_factor_poly(params)
        forms = [OneForm.exact(F, m) for F in default_exact_potentials()]
        for h in h_grid(nest.b, 50, h_min=1e-4 * nest.b):
            cyc = trace_oval(tri, params, h, nest=nest)
            length = cycle_length(cyc)
            for eta in forms:
                q = integral_detailed(tri, params, eta, h, cycle=cyc)
                worst = max(worst, abs(complex(q.value, q.imag_discarded)) / length)
    verdict(report, 2, worst < 1e-7, f"max |I|/length {worst:.2e} over 9 cells x 50 h x 3 F (< 1e-7)")


def test_c03_stokes_oracle(tri, report):
    worst = 0.0
    forms = [form(*Y_DX), form(*X2_DY), form(*CUBIC)]
    for params in (UnfoldingParams(0.0, 0.0), UnfoldingParams(0.1, -0.05)):
        nest = interior_extremum(tri, params)
        h = nest.b / 2
        for eta in forms:
            value = pseudo_abelian_integral(tri, params, eta, h, nest=nest)
            ref = stokes_interior_integral(tri, params, eta, h, nest.center)
            worst = max(worst, abs(value - ref) / abs(ref))
    verdict(report, 3, worst < 1e-4, f"max relative gap to area integral {worst:.2e} (< 1e-4)")


def test_c04_compensator_routes(report):
    hs = [round(0.05 * k, 2) for k in range(1, 20)]
    pair = closed = pf = 0.0
    for e in (0.0, 0.05, 0.1, 0.2):
        for a in (-0.1, 0.0, 0.1):
            for h in hs:
                r = complex(omega_root(h, e, a))
                o = complex(omega_ode(h, e, a))
                c = complex(omega_chart(h, e, a).omega)
                pair = max(pair, abs(r - o), abs(r - c), abs(o - c))
                if a == 0:
                    closed = max(closed, abs(r - complex(omega_closed(h, e))))
                if r.imag == 0:
                    pf = max(pf, pfaffian_residual(lambda t: omega_root(t, e, a), h, e, a))
    ok = pair < 1e-8 and closed < 1e-10 and pf < 1e-8
    verdict(report, 4, ok, f"pairwise {pair:.2e} (< 1e-8), closed form {closed:.2e} (< 1e-10), "
                           f"Pfaffian {pf:.2e} (< 1e-8)")


def test_c05_eps_continuity(report):
    hs = [round(0.05 * k, 2) for k in range(1, 20)]
    lines = []
    ok = True
    for a in (-0.1, 0.0, 0.1):
        coarse = eps_continuity(a, hs, np.linspace(0.005, 0.05, 10))
        fine = eps_continuity(a, hs, np.linspace(0.0025, 0.025, 10))
        c1, c2 = float(coarse.ratios.max()), float(fine.ratios.max())
        drift = abs(c1 - c2) / c2
        slope = float(coarse.slopes.min())
        spread = float(coarse.spread.max())
        ok &= drift < 0.05 and slope > 0.9 and spread < 1.25
        lines.append(f"a={a:+.1f}: C={c1:.3f} drift {drift:.1e} slope>={slope:.3f} spread {spread:.3f}")
    verdict(report, 5, ok, "; ".join(lines))


@pytest.mark.slow
def test_c06_transport_contract(tri, p0, nest0, report):
    fol = darboux_foliation(tri, p0)
    level = back = 0.0
    for frac, beta, shrink in ((0.3, 0.5 * math.pi, 0.3), (0.1, -0.8 * math.pi, 0.2)):
        h = frac * nest0.b
        cyc = trace_oval(tri, p0, h, nest=nest0)
        path = HPath.rotation(h, beta, shrink)
        out = continue_cycle(tri, p0, cyc, path)
        level = max(level, out.level_residual(fol))
        ret = continue_cycle(tri, p0, out, path.reversed())
        back = max(back, cycle_deviation(cyc, ret, fol))
    rng = np.random.default_rng(20)
    model = SaddleModel(1.0, 1.0)
    failures = 0
    worst = 0.0
    for _ in range(20):
        rep = saddle_model_transport_check(model, 0.5, random_inward_path(rng, 0.5), slack=1e-8)
        failures += not rep.passed
        worst = max(worst, rep.max_increase_abs_x, rep.max_increase_abs_y)
    ok = level < 1e-9 and back < 1e-6 and failures == 0
    verdict(report, 6, ok, f"level residual {level:.2e} (< 1e-9), reversal {back:.2e} (< 1e-6), "
                           f"saddle paths failing {failures}/20, worst growth {worst:.1e} (slack 1e-8)")


@pytest.mark.slow
def test_c07_variation_sanity(tri, p0, nest0, ydx, report):
    h = 0.3 * nest0.b
    scale = cycle_length(trace_oval(tri, p0, h, nest=nest0))
    m = tri.integrating_factor_poly(p0)
    single = max(abs(var_integral(tri, p0, OneForm.exact(F, m), h, 1.0, nest=nest0)) / scale
                 for F in default_exact_potentials())
    rng = np.random.default_rng(7)
    scalar = 0.0
    for _ in range(100):
        a, b = rng.uniform(0.05, 2.0), rng.uniform(-3.0, 3.0)
        hh = complex(rng.uniform(0.01, 1.0))
        got = var_scalar(lambda u: np.exp(b * u), complex(np.log(hh)), a)
        want = 2j * math.sin(math.pi * a * b) * hh ** b
        scalar = max(scalar, abs(got - want) / max(1.0, abs(hh ** b)))
    v12 = iterated_var(tri, p0, ydx, h, VarSpec((0.3, 0.2)), nest=nest0)
    v21 = iterated_var(tri, p0, ydx, h, VarSpec((0.2, 0.3)), nest=nest0)
    order = abs(v12 - v21) / max(1.0, abs(v12))
    ok = single < 1e-7 and scalar < 1e-10 and order < 1e-7
    verdict(report, 7, ok, f"Var of M dF {single:.2e} (< 1e-7), h^b identity {scalar:.2e} (< 1e-10), "
                           f"order exchange {order:.2e} (< 1e-7)")


@pytest.mark.slow
def test_c08_variation_series_in_w(tri, p0, nest0, ydx, report):
    hs = np.geomspace(1e-4 * nest0.b, 0.8 * nest0.b, 24)
    spec = VarSpec((1.0, 1.0))
    values = iterated_var_samples(tri, p0, ydx, hs, spec, nest=nest0)
    fit = variation_fit(tri, p0, ydx, spec, hs, degrees=range(9), pole_order=1, tolerance=1e-2, values=values)
    ok = fit.degree is not None and fit.monotone and fit.split_agrees
    res = ", ".join(f"{r:.1e}" for r in fit.residuals)
    verdict(report, 8, ok, f"residuals by degree [{res}] (< 1e-2 at degree {fit.degree}), monotone {fit.monotone}, "
                           f"split difference {fit.split_difference:.1e} (<= 1e-2)")


def _random_logchart(rng) -> LogChartPoly:
    coeffs = {}
    for _ in range(rng.integers(1, 7)):
        l, m = int(rng.integers(-6, 5)), int(rng.integers(0, 4))
        coeffs[(l, m)] = Fraction(int(rng.integers(-9, 10)), int(rng.integers(1, 9)))
    return LogChartPoly(coeffs)


def test_c09_difference_lab(report):
    f = HalfPlaneFn.power(3)

    def F_plus(u):
        return np.array([iterated_sum(f, [1.0], 1, x).value for x in np.atleast_1d(u)])

    u = np.array([-50.0 + 0j])
    err = abs(delta(F_plus, u, 1.0, L=f.L)[0] - f(u[0])) / abs(f(u[0]))
    t = np.geomspace(10.0, 1e4, 30)
    B = fit_decay_exponent(F_plus(ray(t)), t)
    rng = np.random.default_rng(9)
    exact = all(differentiate_logchart(integrate_logchart(p)) == p for p in (_random_logchart(rng) for _ in range(100)))
    ok = err < 1e-8 and abs(B - 2.0) <= 0.15 and exact
    verdict(report, 9, ok, f"Delta_1 F+ = f rel. error {err:.2e} (< 1e-8), decay {B:.3f} vs A-k = 2 (+-0.15), "
                           f"d/du o integral exact on 100: {exact}")


def test_c10_leading_term_classifier(report):
    h = np.geomspace(1e-12, 1e-2, 40)
    wrong = []
    worst = 0.0
    for a in (-1.0, 0.3):
        for k in (0, 1, 2):
            fit = fit_leading_term(h, 1.7 * leading_term_values("power_log", h, alpha=a, k=k))
            worst = max(worst, fit.residual)
            if not (fit.model == "power_log" and fit.k == k and abs(fit.alpha - a) < 1e-6):
                wrong.append(("power_log", a, k))
    for k in (1, 2, 3):
        for l in (0, 1, 2):
            fit = fit_leading_term(h, -0.4 * leading_term_values("inverse_log", h, k=k, l=l))
            worst = max(worst, fit.residual)
            if not (fit.model == "inverse_log" and (fit.k, fit.l) == (k, l)):
                wrong.append(("inverse_log", k, l))
    ok = not wrong and worst < 0.05
    verdict(report, 10, ok, f"misclassified {wrong or 'none'} of 15, worst residual {worst:.1e} (< 5%)")


@pytest.mark.slow
def test_c11_argument_machinery(tri, p0, nest0, ydx, report):
    rng = np.random.default_rng(11)
    contour = SectorContour(0.1, 2.0, 0.75)
    mismatches = 0
    tried = 0
    while tried < 20:
        c = rng.uniform(-2.5, 2.5, 2) + 1j * rng.uniform(-2.5, 2.5, 2)
        near = [abs(abs(z) - contour.r_inner) < 0.02 or abs(abs(z) - contour.r_outer) < 0.02
                or abs(abs(np.angle(z)) - 0.75 * math.pi) * abs(z) < 0.02 for z in c]
        if any(near):
            continue
        tried += 1
        got = sector_zero_count(lambda h: (h - c[0]) * (h - c[1]), contour)
        mismatches += got != roots_in_sector(np.poly(c), 0.1, 2.0, 0.75)
    radii = np.geomspace(1e-2 * nest0.b, 1e-6 * nest0.b, 12)
    growth = growth_exponent(radii, [pseudo_abelian_integral(tri, p0, ydx, r, nest=nest0) for r in radii])
    arc = integral_on_arc(tri, p0, ydx, 1e-3 * nest0.b, nest=nest0, n=16)
    ok_arc, bound = small_arc_check(arc.increment, growth)
    ok = mismatches == 0 and ok_arc
    verdict(report, 11, ok, f"winding mismatches {mismatches}/20; arc increment {arc.increment:.3f} "
                            f"<= 2N'A = {bound:.3f} (N = {growth.N:.3f})")


@pytest.mark.slow
def test_c12_uniformity(tri, cubic, report):
    table = uniformity_experiment(tri, cubic, np.linspace(0.0, 0.1, 5), np.linspace(-0.05, 0.05, 5), n_h=30)
    counts = [r[2] for r in table.rows]
    ok = len(counts) == 25 and all(np.isfinite(counts)) and table.stable
    verdict(report, 12, ok, f"counts {min(counts)}..{max(counts)} over 25 cells, max {table.max_count} "
                            f"-> {table.max_count_refined} under x2 refinement")
