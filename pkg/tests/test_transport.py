from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudoabelian.cycles import cycle_deviation
from pseudoabelian.darboux import OneForm
from pseudoabelian.errors import ConfigError
from pseudoabelian.foliation import darboux_foliation
from pseudoabelian.integrator import integrate_form_detailed
from pseudoabelian.models import SaddleModel, saddle_model_circle
from pseudoabelian.polynomial import BivariatePoly
from pseudoabelian.tracer import trace_oval
from pseudoabelian.transport import (
    HPath,
    VarSpec,
    continue_cycle,
    iterated_var,
    iterated_var_detailed,
    iterated_var_samples,
    lift_tangent,
    transport,
    var_integral,
    var_scalar,
)


@pytest.fixture(scope="module")
def oval(tri, p0, nest0):
    return trace_oval(tri, p0, 0.3 * nest0.b, nest=nest0)


def test_lift_solves_dh(tri, p0, oval):
    fol = darboux_foliation(tri, p0)
    rng = np.random.default_rng(3)
    for k in rng.choice(oval.n, 10, replace=False):
        p = oval.points[k]
        xi = complex(*rng.normal(size=2))
        v = lift_tangent(tri, p0, p, xi)
        st_ = fol.evaluate(p.reshape(1, 2))
        h = np.exp(fol.log_h(fol.principal_logs(st_))[0])
        assert abs(h * (st_.theta[0] @ v) - xi) < 1e-12 * max(1.0, abs(xi))


def test_constant_path_returns_identical_cycle(tri, p0, oval):
    out = continue_cycle(tri, p0, oval, HPath.constant(oval.level))
    np.testing.assert_array_equal(out.points, oval.points)


def test_real_decreasing_continuation_matches_traced_oval(tri, p0, nest0, oval):
    h1 = 0.05 * nest0.b
    out = continue_cycle(tri, p0, oval, HPath.segment(oval.level.real, h1))
    ref = trace_oval(tri, p0, h1, nest=nest0)
    assert np.max(np.abs(out.points.imag)) < 1e-9
    assert cycle_deviation(out, ref, darboux_foliation(tri, p0)) < 1e-6


def test_level_residual_and_reversal(tri, p0, oval):
    fol = darboux_foliation(tri, p0)
    path = HPath.rotation(oval.level.real, 0.4 * math.pi, 0.2)
    out = continue_cycle(tri, p0, oval, path)
    assert out.level_residual(fol) < 1e-9
    assert abs(out.log_level - path.end) < 1e-14
    back = continue_cycle(tri, p0, out, path.reversed())
    assert cycle_deviation(oval, back, fol) < 1e-6


def test_rotation_periodicity_on_saddle():
    # with integer 1/lambda1 the circle {|x| = r} is carried onto itself by a full turn of h;
    # the original markers are followed (inserted markers would sit on chords, not on the circle)
    for lam2 in (1.0, 2.0):
        model = SaddleModel(1.0, lam2)
        fol = model.foliation()
        r, h0 = 0.5, 0.2
        cyc = saddle_model_circle(model, h0, r, n=96)
        res = transport(fol, cyc, HPath.rotation(h0, 2 * math.pi), manage_markers=False)
        out = res.cycle
        assert abs(out.log_level - (math.log(h0) + 2j * math.pi)) < 1e-12
        assert out.level_residual(fol) < 1e-9
        assert np.max(np.abs(np.abs(out.points[:, 0]) - r)) < 1e-8


def test_transport_rejects_off_level_cycle(tri, p0, oval):
    fol = darboux_foliation(tri, p0)
    with pytest.raises(ConfigError):
        transport(fol, oval, HPath.segment(2 * oval.level.real, oval.level.real))


@given(a=st.floats(0.05, 3.0), b=st.floats(-4.0, 4.0), h=st.floats(1e-3, 1.0))
def test_var_scalar_of_power(a, b, h):
    got = var_scalar(lambda u: np.exp(b * u), complex(math.log(h)), a)
    assert abs(got - 2j * math.sin(math.pi * a * b) * h ** b) <= 1e-10 * max(1.0, h ** b)


@given(a=st.floats(0.05, 3.0), u=st.complex_numbers(max_magnitude=20, allow_nan=False, allow_infinity=False))
@settings(max_examples=50)
def test_var_scalar_kills_periodic_functions(a, u):
    # exp(u / a) is invariant under u -> u + 2 pi i a
    assert abs(var_scalar(lambda z: np.exp(z / a), u, a)) <= 1e-9 * max(1.0, abs(np.exp(u / a)))


def test_hpath_concat_and_reverse():
    p = HPath.concat([HPath.rotation(0.5, 1.0, 0.1), HPath.log_linear(0.0, -1.0)])
    assert p.breaks == (0.5,)
    r = p.reversed()
    for t in (0.0, 0.3, 0.7, 1.0):
        assert abs(r.ell(t) - p.ell(1 - t)) < 1e-14
    assert HPath.rotation(0.5, 2.0, 0.3).modulus_decreasing()
    assert not HPath.rotation(0.5, 2.0).modulus_decreasing()


@pytest.mark.slow
def test_variation_is_imaginary_and_k1_matches(tri, p0, nest0, ydx):
    h = 0.2 * nest0.b
    v = var_integral(tri, p0, ydx, h, 0.5, nest=nest0)
    assert abs(v.real) < 1e-9 * abs(v)
    assert abs(iterated_var(tri, p0, ydx, h, VarSpec((0.5,)), nest=nest0) - v) == 0.0


@pytest.mark.slow
def test_var_of_exact_form_vanishes(tri, p0, nest0):
    x, y = BivariatePoly.x(), BivariatePoly.y()
    eta = OneForm.exact(x * y + y ** 3, tri.integrating_factor_poly(p0))
    h = 0.4 * nest0.b
    res = iterated_var_detailed(tri, p0, eta, h, VarSpec((0.5,)), nest=nest0)
    assert abs(res.value) < 1e-8
    assert all(abs(term[2]) < 1e-8 for term in res.terms)


@pytest.mark.slow
def test_batched_samples_match_pointwise(tri, p0, nest0, ydx):
    hs = np.array([0.05, 0.4, 0.15]) * nest0.b
    spec = VarSpec((0.25,))
    batched = iterated_var_samples(tri, p0, ydx, hs, spec, nest=nest0)
    for h, v in zip(hs, batched):
        ref = iterated_var(tri, p0, ydx, h, spec, nest=nest0)
        assert abs(v - ref) < 1e-8 * max(1.0, abs(ref))
    assert len(set(np.round(batched, 6))) == 3


def test_variation_config_errors(tri, p0, nest0, ydx):
    with pytest.raises(ConfigError):
        VarSpec(())
    with pytest.raises(ConfigError):
        VarSpec((0.5, -1.0))
    with pytest.raises(ConfigError):
        iterated_var(tri, p0, ydx, 0.99 * nest0.b, VarSpec((1.0,)), nest=nest0)


def test_snapshots_are_on_intermediate_levels(tri, p0, oval):
    fol = darboux_foliation(tri, p0)
    path = HPath.log_linear(oval.log_level, oval.log_level - 0.5 + 0.3j)
    res = transport(fol, oval, path, snapshots=[0.0, 0.5, 1.0])
    for s, cyc in res.snapshots.items():
        assert abs(cyc.log_level - path.ell(s)) < 1e-14
        assert cyc.level_residual(fol) < 1e-9
    exact = OneForm.exact(BivariatePoly.x(), tri.integrating_factor_poly(p0))
    q = integrate_form_detailed(res.snapshots[0.5], tri, p0, exact, rtol=1e-12)
    assert abs(q.value) < 1e-9
