from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import polynomial as npoly

from pseudoabelian.checks import complex_step_gradient, exact_form_residuals, invariant_suite
from pseudoabelian.darboux import (
    DarbouxSystem,
    OneForm,
    UnfoldingParams,
    check_genericity,
    first_integral,
    integrating_factor,
    log_derivative_form,
    plane_vector_field,
    triangle_system,
)
from pseudoabelian.errors import ConfigError, DomainError, PoleError
from pseudoabelian.polynomial import BivariatePoly, PolyStack

terms = st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4), st.integers(-5, 5)), max_size=6)
points = st.tuples(st.floats(-2, 2), st.floats(-2, 2))


def dense(p: BivariatePoly) -> np.ndarray:
    c = np.zeros((9, 9))
    for (j, k), v in p.coeffs.items():
        c[j, k] = v
    return c


@given(terms, terms, points)
def test_arithmetic_matches_numpy(t1, t2, z):
    p, q = BivariatePoly.from_terms(t1), BivariatePoly.from_terms(t2)
    x, y = z
    ref_p, ref_q = npoly.polyval2d(x, y, dense(p)), npoly.polyval2d(x, y, dense(q))
    assert np.isclose(float((p + q)(x, y)), ref_p + ref_q, rtol=1e-12, atol=1e-9)
    assert np.isclose(float((p * q)(x, y)), ref_p * ref_q, rtol=1e-12, atol=1e-9)
    assert np.isclose(float(p.partial(0)(x, y)), npoly.polyval2d(x, y, npoly.polyder(dense(p), axis=0)),
                      rtol=1e-12, atol=1e-9)


@given(terms, terms)
def test_product_rule_exact(t1, t2):
    p, q = BivariatePoly.from_terms(t1), BivariatePoly.from_terms(t2)
    for var in (0, 1):
        assert (p * q).partial(var) == p.partial(var) * q + p * q.partial(var)


@given(terms)
def test_terms_roundtrip(t):
    p = BivariatePoly.from_terms(t)
    assert BivariatePoly.from_terms(json.loads(json.dumps(p.to_terms()))) == p
    assert (p - p).is_zero() and (p - p).degree == -1


def test_poly_stack_matches_individual_evaluation(tri):
    polys = tri.polys + [tri.q, tri.r, tri.q ** 3 + tri.polys[0]]
    stack = PolyStack(polys)
    x = np.array([0.1, 0.3 + 0.2j, -0.5])
    y = np.array([0.2, 0.1j, 0.7])
    vals, gx, gy = stack.values_and_grads(x, y)
    np.testing.assert_allclose(stack.values(x, y), vals, rtol=1e-15)
    for i, p in enumerate(polys):
        np.testing.assert_allclose(vals[i], p(x, y), rtol=1e-14, atol=1e-15)
        np.testing.assert_allclose(gx[i], p.partial(0)(x, y), rtol=1e-14, atol=1e-15)
        np.testing.assert_allclose(gy[i], p.partial(1)(x, y), rtol=1e-14, atol=1e-15)


def test_system_json_roundtrip(tmp_path, tri):
    path = tmp_path / "sys.json"
    tri.dump(path)
    assert DarbouxSystem.load(path) == tri
    with pytest.raises(ConfigError):
        DarbouxSystem.from_json({"factors": []})
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError):
        DarbouxSystem.load(tmp_path / "bad.json")


def test_system_validation():
    x = BivariatePoly.x()
    with pytest.raises(ConfigError):
        DarbouxSystem(((x, -1.0),), 1 - x, BivariatePoly.const(-1.0), (0, 1, 0, 1))
    with pytest.raises(ConfigError):
        DarbouxSystem(((x, 1.0),), 1 - x, BivariatePoly(), (0, 1, 0, 1))
    with pytest.raises(ConfigError):
        UnfoldingParams(0.6, 0.0).check()


def test_residues(tri):
    assert tri.residues(UnfoldingParams(0.0, 0.1)) == [("P1", 1.0), ("P2", 1.0), ("Q", 0.1)]
    res = dict(tri.residues(UnfoldingParams(0.1, 0.2)))
    assert res["Q+eps*R"] == pytest.approx(10.0)
    assert res["Q"] == pytest.approx(0.2 - 10.0)


@pytest.mark.parametrize("eps,alpha", [(0.0, 0.0), (0.1, -0.05), (0.2, 0.3)])
def test_m_theta_is_integrating_factor_times_theta(tri, eps, alpha):
    params = UnfoldingParams(eps, alpha)
    a, b = tri.m_theta(params)
    rng = np.random.default_rng(0)
    for _ in range(20):
        z = (complex(*rng.uniform(0.05, 0.4, 2)), complex(*rng.uniform(0.05, 0.4, 2)))
        m = integrating_factor(tri, params, z)
        th = log_derivative_form(tri, params, z)
        np.testing.assert_allclose([complex(a(*z)), complex(b(*z))], m * th, rtol=1e-12)
        v = plane_vector_field(tri, params, z)
        assert abs(th @ v) <= 1e-12 * np.linalg.norm(th) * np.linalg.norm(v)


@pytest.mark.parametrize("eps,alpha", [(0.0, 0.0), (0.1, 0.05)])
def test_theta_matches_complex_step(tri, eps, alpha):
    params = UnfoldingParams(eps, alpha)
    for z in [(0.2, 0.3), (0.5, 0.1), (0.05, 0.05)]:
        np.testing.assert_allclose(log_derivative_form(tri, params, z).real,
                                   complex_step_gradient(tri, params, *z), rtol=1e-13)


def test_first_integral_values(tri):
    p = UnfoldingParams()
    # x y exp(-1/(1 - x - y)) at (1/4, 1/4)
    assert first_integral(tri, p, (0.25, 0.25)) == pytest.approx(np.exp(-2.0) / 16, rel=1e-15)
    assert first_integral(tri, p, (0.0, 0.3)) == 0.0
    with pytest.raises(DomainError):
        first_integral(tri, p, (0.6, 0.6))
    with pytest.raises(PoleError):
        log_derivative_form(tri, p, (0.5, 0.5))


def test_genericity(tri):
    assert check_genericity(tri).passed
    x, y = BivariatePoly.x(), BivariatePoly.y()
    # x and x - y^2 are tangent at the origin
    bad = DarbouxSystem(((x, 1.0), (x - y * y, 1.0)), 1 - x - y, BivariatePoly.const(-1.0), (-0.5, 1, -0.5, 1))
    assert not check_genericity(bad).passed


def test_exact_form_constructor():
    f = BivariatePoly.from_terms([[2, 1, 3.0]])
    m = BivariatePoly.from_terms([[0, 0, 1.0], [1, 0, 2.0]])
    eta = OneForm.exact(f, m)
    assert eta.a == m * f.partial(0) and eta.b == m * f.partial(1)
    assert eta.degree == 3
    with pytest.raises(ConfigError):
        eta.check_degree(2)
    assert OneForm.from_json(json.loads(json.dumps(eta.to_json()))) == eta


@pytest.mark.slow
def test_invariant_suite(tri):
    rep = invariant_suite(tri, UnfoldingParams(0.05, -0.02), points=200, exact_samples=5)
    assert rep.passed, rep.as_dict()
    assert exact_form_residuals(tri, UnfoldingParams(), n=4)["max_relative"] < 1e-7


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 0.3), st.floats(-0.3, 0.3), st.floats(0.05, 0.45), st.floats(0.05, 0.45))
def test_field_is_tangent_to_levels(eps, alpha, x, y):
    tri = triangle_system()
    params = UnfoldingParams(eps, alpha)
    g = complex_step_gradient(tri, params, x, y)
    v = plane_vector_field(tri, params, (x, y)).real
    assert abs(g @ v) <= 1e-10 * np.linalg.norm(g) * np.linalg.norm(v)
