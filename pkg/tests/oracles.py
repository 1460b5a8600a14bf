"""Independent reference computations used by the tests.

None of these share code with the package beyond polynomial evaluation:
the area oracle integrates over the interior of an oval in polar
coordinates, the root oracle uses ``numpy.roots``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

from pseudoabelian.darboux import log_first_integral
from pseudoabelian.errors import DomainError


def _log_h(sys, params, x, y):
    try:
        return log_first_integral(sys, params, (x, y))
    except DomainError:
        return -math.inf


def oval_radius(sys, params, center, h, theta, r_max=2.0):
    """Distance from ``center`` to ``{H = h}`` along the ray at angle ``theta``."""
    lh = math.log(h)
    c, s = math.cos(theta), math.sin(theta)

    def g(r):
        return _log_h(sys, params, center[0] + r * c, center[1] + r * s) - lh

    lo, hi = 0.0, 1e-3
    while g(hi) > 0:
        lo, hi = hi, 2 * hi
        if hi > r_max:
            raise RuntimeError("level set not reached along the ray")
    return brentq(lambda r: max(g(r), -1e3), lo, hi, xtol=1e-15, rtol=1e-15)


def stokes_interior_integral(sys, params, eta, h, center, *, n_theta=256, n_r=48):
    """``int int d(eta / M)`` over the disc bounded by the oval ``{H = h}`` around ``center``.

    The oval must be star-shaped about ``center``.  Radial Gauss-Legendre,
    periodic trapezoid in the angle; the counterclockwise orientation is
    the positive one.
    """
    m = sys.integrating_factor_poly(params)
    a, b = eta.a, eta.b
    mx, my, ay, bx = m.partial(0), m.partial(1), a.partial(1), b.partial(0)
    gx, gw = np.polynomial.legendre.leggauss(n_r)
    total = 0.0
    for th in 2 * np.pi * np.arange(n_theta) / n_theta:
        R = oval_radius(sys, params, center, h, th)
        r = 0.5 * R * (gx + 1)
        x = center[0] + r * math.cos(th)
        y = center[1] + r * math.sin(th)
        M = np.array([m(xi, yi) for xi, yi in zip(x, y)], dtype=float)
        dbx = np.array([bx(xi, yi) * Mi - b(xi, yi) * mx(xi, yi) for xi, yi, Mi in zip(x, y, M)], dtype=float)
        day = np.array([ay(xi, yi) * Mi - a(xi, yi) * my(xi, yi) for xi, yi, Mi in zip(x, y, M)], dtype=float)
        integrand = (dbx - day) / M ** 2
        total += 0.5 * R * float(np.sum(gw * integrand * r))
    return total * 2 * np.pi / n_theta


def roots_in_sector(coeffs, r_inner, r_outer, half_angle):
    """Count roots of a polynomial (``numpy.roots`` order) in the sector ``r_in < |h| < r_out, |arg h| < a pi``."""
    rts = np.roots(coeffs)
    rad = np.abs(rts)
    ang = np.abs(np.angle(rts))
    return int(np.sum((rad > r_inner) & (rad < r_outer) & (ang < half_angle * np.pi)))
