from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudoabelian.compensator import (
    UPath,
    chart_solution,
    check_bijection,
    defining_residual,
    fold,
    h_tilde,
    log_h_tilde,
    omega_chart,
    omega_closed,
    omega_ode,
    omega_root,
    w_exponential,
)
from pseudoabelian.errors import ConfigError, LeftChartDomain, NoConvergence, SingularArgument


@given(st.floats(1e-8, 0.99), st.floats(0.0, 0.3), st.floats(0.0, 0.3))
@settings(max_examples=60, deadline=None)
def test_root_inverts_h_tilde(h, eps, alpha):
    om = omega_root(h, eps, alpha)
    assert isinstance(om, float)
    assert abs(h_tilde(-1.0 / om, eps, alpha) / h - 1) < 1e-11
    assert -1.0 / om > eps


@given(st.floats(1e-6, 0.99), st.sampled_from([1e-3, 0.05, 0.1, 0.2]))
def test_closed_form_at_alpha_zero(h, eps):
    assert omega_root(h, eps, 0.0) == pytest.approx((h ** eps - 1) / eps, rel=1e-11, abs=1e-14)
    assert omega_closed(h, 0.0) == pytest.approx(math.log(h), rel=1e-15)


def test_h_tilde_formula():
    x, eps, alpha = 0.7, 0.1, 0.3
    assert h_tilde(x, eps, alpha) == pytest.approx(x ** alpha * ((x - eps) / x) ** (1 / eps), rel=1e-14)
    assert h_tilde(x, 0.0, alpha) == pytest.approx(x ** alpha * math.exp(-1 / x), rel=1e-14)
    with pytest.raises(SingularArgument):
        log_h_tilde(0.0, 0.1, 0.0)


def test_fold_location():
    assert fold(0.1, 0.2) is None
    f = fold(0.05, -0.1)
    assert f.w == pytest.approx(10.05)
    # H~ is maximal at the fold along the real axis
    w = np.array([f.w - 0.1, f.w, f.w + 0.1])
    vals = np.real(log_h_tilde(w, 0.05, -0.1))
    assert vals[1] > vals[0] and vals[1] > vals[2]


def test_past_fold_is_complex_and_routes_agree():
    eps, alpha = 0.0, -0.1
    f = fold(eps, alpha)
    h = min(0.99, 1.5 * f.h)
    assert h > f.h
    r = omega_root(h, eps, alpha)
    assert isinstance(r, complex) and r.imag != 0
    assert abs(r - omega_ode(h, eps, alpha)) < 1e-9
    assert abs(r - omega_chart(h, eps, alpha).omega) < 1e-9
    assert defining_residual(r, h, eps, alpha) < 1e-12
    with pytest.raises(NoConvergence):
        omega_root(f.h, eps, alpha)


def test_ode_from_known_point():
    eps, alpha = 0.1, 0.05
    om0 = omega_root(0.3, eps, alpha)
    assert omega_ode(0.02, eps, alpha, h0=0.3, omega0=om0) == pytest.approx(omega_root(0.02, eps, alpha),
                                                                           rel=1e-10)
    with pytest.raises(ConfigError):
        omega_ode(0.02, eps, alpha, h0=0.3)
    with pytest.raises(SingularArgument):
        omega_ode(0.0, eps, alpha)


@pytest.mark.parametrize("chart", ["S", "E", "N"])
def test_single_chart_matches_root(chart):
    eps, alpha = 0.1, 0.05
    h0 = {"S": 1e-3, "E": 0.3, "N": 0.9}[chart]
    h1 = {"S": 2e-3, "E": 0.25, "N": 0.85}[chart]
    w0 = -1.0 / omega_root(h0, eps, alpha)
    path = UPath.straight(math.log(h0), math.log(h1))
    try:
        res = chart_solution(chart, eps, alpha, path, w0)
    except LeftChartDomain:
        pytest.skip(f"W0={w0} not in chart {chart}")
    assert res.omega.real == pytest.approx(omega_root(h1, eps, alpha), rel=1e-9)


def test_chart_errors():
    path = UPath.straight(-1.0, -2.0)
    with pytest.raises(ConfigError):
        chart_solution("S", 0.0, 0.0, path, 0.5)
    with pytest.raises(LeftChartDomain):
        chart_solution("E", 0.1, 0.0, path, 10.0)
    with pytest.raises(ConfigError):
        chart_solution("Z", 0.1, 0.0, path, 1.0)


@given(st.floats(-500.0, -5.5), st.floats(-0.3, 0.3))
def test_exponential_chart(u, alpha):
    w = w_exponential(u, alpha)
    assert abs(np.real(log_h_tilde(w, 0.0, alpha)) - u) < 1e-12 * abs(u)
    assert w_exponential(u, 0.0) == pytest.approx(-1 / u, rel=1e-15)


@pytest.mark.parametrize("eps,alpha", [(0.0, 0.0), (0.1, 0.1), (0.2, -0.05)])
def test_bijection(eps, alpha):
    rep = check_bijection(eps, alpha, n=120)
    f = fold(eps, alpha)
    if f is None or f.h >= 1:
        assert rep.monotone
    else:
        assert rep.real_up_to < f.h
