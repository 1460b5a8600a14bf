"""Invariant suite: first-integral identities and vanishing of exact forms.

The first-integral check compares ``theta`` (a rational formula) with
complex-step derivatives of ``log H``, which are exact to rounding and
share no code with the formula.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .darboux import (
    DarbouxSystem,
    OneForm,
    UnfoldingParams,
    check_genericity,
    log_derivative_form,
    plane_vector_field,
)
from .foliation import log1p_over
from .integrator import h_grid, integral_detailed
from .polynomial import BivariatePoly
from .tracer import interior_extremum

__all__ = [
    "log_h_complex",
    "complex_step_gradient",
    "random_domain_points",
    "first_integral_residuals",
    "exact_form_residuals",
    "default_exact_potentials",
    "SuiteReport",
    "invariant_suite",
]


def log_h_complex(sys: DarbouxSystem, params: UnfoldingParams, x, y):
    """``log H`` with principal logarithms of each factor, at complex ``(x, y)``."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    out = np.zeros(np.broadcast(x, y).shape, dtype=complex)
    for p, a in sys.factors:
        out = out + a * np.log(p(x, y))
    q = sys.q(x, y)
    r = sys.r(x, y)
    out = out + params.alpha * np.log(q)
    return out + log1p_over(params.eps, r / q)


def complex_step_gradient(sys: DarbouxSystem, params: UnfoldingParams, x: float, y: float,
                          step: float = 1e-30) -> np.ndarray:
    """``d log H`` at a real point by the complex-step rule ``Im f(x + i s) / s``."""
    gx = log_h_complex(sys, params, x + 1j * step, y).imag / step
    gy = log_h_complex(sys, params, x, y + 1j * step).imag / step
    return np.array([float(gx), float(gy)])


def random_domain_points(sys: DarbouxSystem, params: UnfoldingParams, n: int, seed: int = 0,
                         margin: float = 1e-3) -> np.ndarray:
    """``n`` uniform points of the region where the real principal branch of ``H`` is defined."""
    rng = np.random.default_rng(seed)
    xmin, xmax, ymin, ymax = sys.region
    pts = []
    while len(pts) < n:
        cand = rng.uniform((xmin, ymin), (xmax, ymax), size=(4 * n, 2))
        for x, y in cand:
            vals = [p(x, y) for p in sys.polys] + [sys.q(x, y)]
            if params.eps != 0:
                vals.append(sys.q(x, y) + params.eps * sys.r(x, y))
            if min(vals) > margin:
                pts.append((x, y))
                if len(pts) == n:
                    break
    return np.array(pts)


def first_integral_residuals(sys: DarbouxSystem, params: UnfoldingParams, n: int = 1000,
                             seed: int = 0) -> dict:
    """Max relative residuals of ``dH = H theta`` and ``dH(v) = 0`` at random points.

    ``dH`` is ``H`` times the complex-step gradient ``g`` of ``log H`` and
    ``v`` the polynomial plane field.  The common factor ``H`` cancels in
    both relative residuals, ``|dH - H theta| / |dH| = |g - theta| / |g|``
    and ``|dH(v)| / (|dH| |v|)``, so they are evaluated without ``H``
    (which underflows near ``Q = 0`` at ``eps = 0``).
    """
    pts = random_domain_points(sys, params, n, seed)
    r1 = r2 = 0.0
    for x, y in pts:
        g = complex_step_gradient(sys, params, x, y)
        th = log_derivative_form(sys, params, (x, y))
        ng = float(np.linalg.norm(g))
        r1 = max(r1, float(np.linalg.norm(g - th)) / ng)
        v = plane_vector_field(sys, params, (x, y))
        r2 = max(r2, abs(complex(g @ v)) / (ng * float(np.linalg.norm(v))))
    return {"points": int(len(pts)), "dH_minus_H_theta": r1, "dH_of_field": r2}


def default_exact_potentials() -> list[BivariatePoly]:
    x, y = BivariatePoly.x(), BivariatePoly.y()
    return [x * x + y, x * y * y - 2.0 * x, x ** 3 + 0.5 * x * y - y * y]


def exact_form_residuals(sys: DarbouxSystem, params: UnfoldingParams, potentials=None, *, n: int = 10,
                         h_min_frac: float = 1e-4) -> dict:
    """``max |I| / length`` over ``h`` samples for ``eta = M dF``, whose integral vanishes."""
    potentials = potentials if potentials is not None else default_exact_potentials()
    nest = interior_extremum(sys, params)
    m = sys.integrating_factor_poly(params)
    worst = 0.0
    for F in potentials:
        eta = OneForm.exact(F, m)
        for h in h_grid(nest.b, n, h_min=h_min_frac * nest.b):
            q = integral_detailed(sys, params, eta, h, nest=nest)
            worst = max(worst, abs(complex(q.value, q.imag_discarded)) / q.length)
    return {"potentials": len(potentials), "samples": n, "max_relative": worst}


@dataclass
class SuiteReport:
    passed: bool
    genericity: dict
    first_integral: dict
    exact_forms: dict
    tolerances: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"passed": self.passed, "genericity": self.genericity, "first_integral": self.first_integral,
                "exact_forms": self.exact_forms, "tolerances": self.tolerances}


def invariant_suite(sys: DarbouxSystem, params: UnfoldingParams, *, points: int = 1000, seed: int = 0,
                    identity_tol: float = 1e-9, exact_tol: float = 1e-7, exact_samples: int = 10) -> SuiteReport:
    gen = check_genericity(sys)
    fi = first_integral_residuals(sys, params, points, seed)
    ex = exact_form_residuals(sys, params, n=exact_samples)
    ok = (gen.passed and fi["dH_minus_H_theta"] < identity_tol and fi["dH_of_field"] < identity_tol
          and ex["max_relative"] < exact_tol)
    return SuiteReport(bool(ok), gen.as_dict(), fi, ex,
                       {"identity": identity_tol, "exact_form": exact_tol})
