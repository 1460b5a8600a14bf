from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pseudoabelian.difference import (
    HalfPlaneFn,
    LogChartPoly,
    cochain_difference,
    delta,
    delta_iter,
    differentiate_logchart,
    fit_decay_exponent,
    integrate_logchart,
    iterated_sum,
    principal_part,
    ray,
    solve_delta,
    solve_delta_leading,
)
from pseudoabelian.errors import (
    DecayAssumptionViolated,
    Divergence,
    DomainViolation,
    InsufficientExpansionOrder,
)

U = np.array([-30.0 + 2.0j, -12.5 - 7.0j, -100.0 + 0.5j])

monomials = st.tuples(st.integers(-6, 4), st.integers(0, 3),
                      st.fractions(min_value=-9, max_value=9, max_denominator=12))
polys = st.lists(monomials, max_size=6).map(lambda ts: LogChartPoly({(l, m): c for l, m, c in ts}))


def test_delta_trivial_cases():
    a = 0.7
    f = lambda u: np.exp(3 * u / a)
    assert np.max(np.abs(delta(f, U, a))) < 1e-12 * np.max(np.abs(f(U)))
    np.testing.assert_allclose(delta(lambda u: u, U, a), 2j * math.pi * a, rtol=1e-14)
    np.testing.assert_allclose(delta(lambda u: u * u, U, 1.0), 4j * math.pi * U, rtol=1e-13)
    np.testing.assert_allclose(delta_iter(lambda u: u * u, U, [0.5, 0.25]),
                               delta(lambda v: delta(lambda u: u * u, v, 0.25), U, 0.5), rtol=1e-13)


def test_delta_respects_half_plane():
    with pytest.raises(DomainViolation):
        delta(HalfPlaneFn.power(2), np.array([-3.0 + 0j]), 1.0)


def test_integrate_examples():
    assert integrate_logchart(LogChartPoly.monomial(-1)) == LogChartPoly.monomial(0, 1)
    assert integrate_logchart(LogChartPoly.monomial(-1, 1)) == LogChartPoly.monomial(0, 2, Fraction(1, 2))
    # int log u = u log u - u
    assert integrate_logchart(LogChartPoly.monomial(0, 1)) == LogChartPoly({(1, 1): 1, (1, 0): -1})


@given(polys)
def test_differentiate_inverts_integrate(p):
    assert differentiate_logchart(integrate_logchart(p)) == p


@given(polys, polys)
def test_leibniz_rule(p, q):
    assert (p * q).derivative() == p.derivative() * q + p * q.derivative()


@given(polys)
def test_json_roundtrip(p):
    back = LogChartPoly.from_json(p.to_json())
    assert back == p.to_complex()


def test_numeric_derivative_agrees():
    p = LogChartPoly({(-2, 1): 3, (1, 2): Fraction(-1, 4), (0, 0): 2})
    u = np.array([-20.0 + 1j])
    d = 1e-5
    num = (p(u + d) - p(u - d)) / (2 * d)
    np.testing.assert_allclose(num, p.derivative()(u), rtol=1e-8)


def test_principal_part_threshold():
    coeffs = {(m, l): 1.0 for m in range(3) for l in range(3) if m + l <= 5}
    p, _ = principal_part(coeffs, 3.0, order=5.5)
    assert all(-l <= 4 for l, _ in p.coeffs)
    with pytest.raises(InsufficientExpansionOrder):
        principal_part(coeffs, 3.0, order=4.0)
    p, M = principal_part({(0, 1): 1.0}, 0.5, f=lambda u: 1 / u)
    assert p == LogChartPoly.monomial(-1, 0, 1.0) and M < 1e-12


def test_solve_delta_leading_gains_one_order():
    p = LogChartPoly.monomial(-2)
    q = solve_delta_leading(p, 1.0)
    np.testing.assert_allclose(q.coeffs[(-1, 0)], -1 / (2j * math.pi))
    t = np.geomspace(10, 1e4, 30)
    res = np.abs(p(ray(t)) - delta(q, ray(t), 1.0))
    # the symmetric difference has no even-order error term, so the gain is at least one order
    assert fit_decay_exponent(res, t) > 3.0 - 0.1
    assert solve_delta_leading(LogChartPoly(), 1.0).is_zero()


def test_solve_delta_leading_detects_bad_input():
    # a polynomial that grows: its integral's difference does not improve the decay
    with pytest.raises((DecayAssumptionViolated, ValueError)):
        solve_delta_leading(LogChartPoly.monomial(-1), -1.0)


@pytest.mark.parametrize("residues", [[1.0], [0.5, 1.5], [1.0, 1.0]])
def test_solve_delta_reaches_requested_order(residues):
    p = LogChartPoly({(-3, 1): 1.0, (-4, 0): 2.0})
    A = 7.0
    P = solve_delta(p, residues, A)
    t = np.geomspace(30, 300, 12)
    res = np.abs(p(ray(t)) - delta_iter(P, ray(t), residues))
    assert fit_decay_exponent(res, t) > A - 0.2


def test_iterated_sum_solves_difference_equation():
    f = HalfPlaneFn.power(4)
    for residues in ([1.0], [0.5, 0.75]):
        F = lambda v: np.array([iterated_sum(f, residues, 1, x).value for x in np.atleast_1d(v)])
        u = np.array([-40.0 + 0j])
        got = delta_iter(F, u, residues)[0]
        assert abs(got - f(u[0])) < 1e-8 * abs(f(u[0]))


def test_iterated_sum_errors():
    with pytest.raises(Divergence):
        iterated_sum(HalfPlaneFn.power(1.5), [1.0, 1.0], 1, -20.0)
    with pytest.raises(DomainViolation):
        iterated_sum(HalfPlaneFn.power(3), [1.0], 1, -20.0 - 50j)
    with pytest.raises(ValueError):
        iterated_sum(lambda u: u ** -3, [1.0], 1, -20.0)


def test_cochain_difference_matches_two_sums():
    f = HalfPlaneFn.power(3)
    u = -30.0 + 1.0j
    d = cochain_difference(f, 1.0, u)
    two = iterated_sum(f, [1.0], -1, u, N=512).value - iterated_sum(f, [1.0], 1, u, N=512).value
    assert abs(d - two) < 1e-6 * abs(d)
    with pytest.raises(Divergence):
        cochain_difference(lambda v: np.asarray(v) ** 0, 1.0, u)


def test_decay_of_lattice_sum():
    f = HalfPlaneFn.power(5)
    t = np.geomspace(10, 1e4, 25)
    F = [iterated_sum(f, [1.0, 1.0], 1, x).value for x in ray(t)]
    assert abs(fit_decay_exponent(F, t) - 3.0) < 0.15
