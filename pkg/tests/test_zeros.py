from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import roots_in_sector
from pseudoabelian.compensator import h_tilde, omega_root
from pseudoabelian.errors import ConfigError, FitError, MonotonicityFailure, UndersampledPhase, ZeroOnContour
from pseudoabelian.zeros import (
    SectorContour,
    UniformityTable,
    analyze_variation,
    argument_increment,
    composite_zeros,
    fit_leading_term,
    growth_exponent,
    leading_term_values,
    real_sign_changes,
    sector_winding,
    sector_zero_count,
    small_arc_check,
)

SECTOR = SectorContour(0.1, 2.0, 0.75)
roots = st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False)


def _clear(c: complex, contour: SectorContour = SECTOR, gap: float = 0.02) -> bool:
    """True when ``c`` is not within ``gap`` of the sector boundary."""
    r, a = abs(c), abs(math.atan2(c.imag, c.real)) if c != 0 else 0.0
    return (abs(r - contour.r_inner) > gap and abs(r - contour.r_outer) > gap
            and (r == 0 or abs(a - contour.half_angle * math.pi) > gap))


def _poly(rs):
    return lambda h: np.prod([h - r for r in rs], axis=0)


def test_argument_increment_errors():
    t = np.linspace(0, 2 * np.pi, 9)
    assert argument_increment(np.exp(1j * t)) == pytest.approx(2 * np.pi)
    with pytest.raises(ZeroOnContour):
        argument_increment([1.0, 0.0, 1.0])
    with pytest.raises(UndersampledPhase):
        argument_increment(np.exp(1j * np.linspace(0, 2 * np.pi, 3)))
    assert argument_increment([1.0 + 1j]) == 0.0


def test_sector_count_matches_roots():
    rng = np.random.default_rng(11)
    done = 0
    while done < 10:
        rs = list(rng.uniform(-2.2, 2.2, 3) + 1j * rng.uniform(-2.2, 2.2, 3))
        if not all(_clear(r) for r in rs):
            continue
        coeffs = np.poly(rs)
        assert sector_zero_count(_poly(rs), SECTOR) == roots_in_sector(coeffs, 0.1, 2.0, 0.75)
        done += 1


def test_sector_in_log_chart_sees_other_sheets():
    # h^(1/2) - i/2 vanishes at u = 2 log 0.5 + i pi, on the edge of the principal sheet
    f = lambda u: np.exp(u / 2) - 0.5j
    assert sector_zero_count(f, SectorContour(0.1, 2.0, 1.2), log_chart=True) == 1
    assert sector_zero_count(f, SectorContour(0.1, 2.0, 0.8), log_chart=True) == 0


def test_contour_validation():
    with pytest.raises(ConfigError):
        SectorContour(1.0, 0.5)
    with pytest.raises(ConfigError):
        SectorContour(0.1, 0.5, 0.0)
    assert SECTOR.contains([1.0, -1.0, 0.05]).tolist() == [True, False, False]


@settings(max_examples=20, deadline=None)
@given(st.lists(roots, min_size=1, max_size=2), st.lists(roots, min_size=1, max_size=2))
def test_winding_is_additive_over_products(r1, r2):
    if not all(_clear(r) for r in r1 + r2):
        return
    a = sector_zero_count(_poly(r1), SECTOR)
    b = sector_zero_count(_poly(r2), SECTOR)
    assert sector_zero_count(_poly(r1 + r2), SECTOR) == a + b


@settings(max_examples=15, deadline=None)
@given(st.lists(roots, min_size=1, max_size=3), st.sampled_from([8, 32, 200]))
def test_winding_independent_of_sampling(rs, n):
    if not all(_clear(r) for r in rs):
        return
    contour = SectorContour(0.1, 2.0, 0.75, n=n)
    assert sector_zero_count(_poly(rs), contour) == sector_zero_count(_poly(rs), SECTOR)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(0.15, 1.9), min_size=1, max_size=3), st.lists(roots, max_size=2))
def test_real_zeros_bounded_by_sector_count(real_rs, other):
    # conjugate pairs keep f real on the real axis
    rs = list(real_rs) + list(other) + [complex(r).conjugate() for r in other]
    if not all(_clear(complex(r)) for r in rs) or min(np.diff(sorted(real_rs)), default=1) < 1e-3:
        return
    f = _poly(rs)
    n_real = len(real_sign_changes(lambda x: float(np.real(f(x))), 0.1, 2.0, n=400))
    assert n_real <= sector_zero_count(f, SECTOR)


def test_winding_report_fields():
    rep = sector_winding(_poly([1.0, 0.5j]), SECTOR)
    assert rep.count == 2 and abs(rep.winding - 2) < 1e-9
    assert set(rep.increments) == {"outer", "upper", "inner", "lower"}


def test_growth_exponent():
    r = np.geomspace(1e-1, 1e-5, 12)
    g = growth_exponent(r, 3.0 * r ** -2.0)
    assert g.N == pytest.approx(2.0, abs=1e-12) and g.band[0] <= 2.0 <= g.band[1]
    with pytest.raises(FitError):
        growth_exponent(r[::-1], r)
    with pytest.raises(FitError):
        growth_exponent(r[:2], r[:2])
    with pytest.raises(FitError):
        growth_exponent(r, np.zeros_like(r))


def test_small_arc_check():
    g = growth_exponent(np.geomspace(1e-1, 1e-5, 8), np.geomspace(1e-1, 1e-5, 8) ** -1.0)
    ok, bound = small_arc_check(2.0, g, 0.5)
    assert ok and bound == pytest.approx(2 * 1.5 * 0.5 * math.pi)
    assert not small_arc_check(bound + 1e-6, g, 0.5)[0]


@pytest.mark.parametrize("model,kw", [
    ("power_log", {"alpha": 0.7, "k": 0}),
    ("power_log", {"alpha": 1.0, "k": 2}),
    ("inverse_log", {"k": 1, "l": 0}),
    ("inverse_log", {"k": 2, "l": 1}),
])
def test_classifier_recovers_models(model, kw):
    h = np.geomspace(1e-12, 1e-2, 80)
    v = leading_term_values(model, h, coefficient=-2.5, **kw)
    fit = fit_leading_term(h, v)
    assert fit.model == model and fit.k == kw["k"] and fit.l == kw.get("l", 0)
    assert fit.coefficient == pytest.approx(-2.5, rel=1e-6)


def test_classifier_rejects_oscillation():
    h = np.geomspace(1e-12, 1e-2, 80)
    fit = fit_leading_term(h, np.sin(np.log(h)) + 0.1)
    assert fit.model == "unclassified"
    with pytest.raises(FitError):
        fit_leading_term(np.geomspace(1e-3, 1e-2, 20), np.ones(20))
    with pytest.raises(ConfigError):
        fit_leading_term(np.array([0.5, 1.5, 0.2]), np.ones(3))


def test_real_sign_changes_finds_close_pair():
    f = lambda x: (x - 0.5) ** 2 - 1e-6
    for g in (f, lambda x: -f(x)):
        z = real_sign_changes(g, 0.0, 1.0, n=64)
        assert len(z) == 2
        np.testing.assert_allclose(z, [0.499, 0.501], atol=1e-12)
    # a double root touches zero without crossing
    assert real_sign_changes(lambda x: -((x - 0.25) ** 2) * (2 - x), 0.1, 1.0, n=400) == []
    # a pole is not a zero
    assert real_sign_changes(lambda x: 1 / (x - 0.3), 0.0, 1.0, n=64) == []


def test_composite_zeros_three_roots():
    eps, alpha = 0.1, 0.05
    hs = [1e-4, 1e-3, 1e-2]
    ws = [-1.0 / omega_root(h, eps, alpha) for h in hs]
    f = lambda w: np.prod([w - wk for wk in ws], axis=0)
    res = composite_zeros(f, eps, alpha, (1e-5, 0.5))
    assert res.count == 3
    np.testing.assert_allclose(sorted(res.zeros_h), hs, rtol=1e-8)
    assert res.zeros_h[0] == pytest.approx(float(np.real(h_tilde(res.zeros_w[0], eps, alpha))))


def test_composite_zeros_past_fold():
    with pytest.raises(MonotonicityFailure):
        composite_zeros(lambda w: w, 0.0, -0.1, (1e-3, 0.99))
    with pytest.raises(ConfigError):
        composite_zeros(lambda w: w, 0.0, 0.0, (0.5, 0.1))


def test_analyze_variation_laurent_and_degenerate():
    w = np.linspace(0.05, 0.2, 30)
    v = 0.3 / w + 1.0 - 2.0 * w + 1j * w ** 2
    fit = analyze_variation(np.exp(-1 / w), w, v, tolerance=1e-10)
    assert fit.degree == 2 and fit.monotone and fit.split_agrees
    assert fit.residuals[2] < 1e-12
    deg = analyze_variation(np.exp(-1 / w), w, np.zeros(30))
    assert deg.degenerate and deg.split_agrees


def test_uniformity_table_csv(tmp_path):
    t = UniformityTable([(0.0, 0.0, 1, 1, 0.0085, 1e-9), (0.1, 0.05, 1, 2, 0.0079, 1e-9)], 30, 2)
    assert t.max_count == 1 and t.max_count_refined == 2 and not t.stable
    path = tmp_path / "u.csv"
    t.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "eps,alpha,zero_count,b,min_reachable_h,zero_count_refined"
    assert lines[2].split(",")[2] == "1" and lines[2].split(",")[-1] == "2"
