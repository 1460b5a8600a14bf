"""The generalized compensator ``omega(h, eps, alpha)``.

``omega`` is defined by ``H~(-1/omega) = h`` with

    H~(x) = x**alpha ((x - eps) / x)**(1/eps)     (eps != 0)
    H~(x) = x**alpha exp(-1/x)                     (eps == 0).

Writing ``W = -1/omega`` and ``u = log h`` gives the autonomous equation

    dW/du = W (W - eps) / (1 + alpha (W - eps)),

which is what the ODE and chart routes integrate.  Three independent
evaluation routes are provided: Newton on the defining equation
(:func:`omega_root`), direct integration of the equation above
(:func:`omega_ode`) and integration in the blown-up charts near
``W = 0``, on the annulus and near ``W = infinity`` (:func:`chart_solution`,
:func:`omega_chart`).

Branch: for real ``h`` in ``(0, 1]`` the principal branch is the one with
``W`` real in ``(eps, W_fold)`` and ``W -> eps`` as ``h -> 0``.  For
``alpha < 0`` the map ``W -> H~(W)`` has a fold at
``W_fold = eps - 1/alpha``; above the fold value ``h_fold`` no real
solution exists and the value returned is the continuation along a path
passing above the fold in the ``log h`` plane (that is, ``omega(h + i0)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigError, LeftChartDomain, NoConvergence, SingularArgument
from .foliation import log1p_over

__all__ = [
    "CHARTS",
    "h_tilde",
    "log_h_tilde",
    "omega_closed",
    "omega_root",
    "omega_ode",
    "omega_chart",
    "w_exponential",
    "chart_solution",
    "ChartResult",
    "fold",
    "pfaffian_residual",
    "defining_residual",
    "check_bijection",
    "BijectionReport",
    "eps_continuity",
    "ContinuityReport",
    "UPath",
]

CHARTS = ("S", "E", "N")

# chart validity regions in |W|
_S_MAX = 1.0
_E_MIN, _E_MAX = 0.25, 4.0
_N_MIN = 1.0


def _real_if_exact(z: complex):
    z = complex(z)
    return z.real if z.imag == 0.0 else z


def _log1p_over(e: float, z):
    """``log1p(e z) / e`` with the ``e -> 0`` limit ``z``."""
    return z if e == 0 else log1p_over(e, z)


def log_h_tilde(x, eps: float, alpha: float):
    """Principal ``log H~(x)``."""
    x = np.asarray(x, dtype=complex)
    if np.any(x == 0) or (eps != 0 and np.any(x == eps)):
        raise SingularArgument(f"H~ is singular at x in {{0, {eps}}}", operation="h_tilde")
    with np.errstate(divide="ignore", invalid="ignore"):
        return alpha * np.log(x) + _log1p_over(eps, -1.0 / x)


def h_tilde(x, eps: float, alpha: float):
    """``H~(x, eps, alpha)``; real for real ``x > max(eps, 0)``."""
    v = np.exp(log_h_tilde(x, eps, alpha))
    if np.ndim(v) == 0:
        return _real_if_exact(v) if np.isrealobj(x) and complex(x).real > max(eps, 0) else complex(v)
    return v


def omega_closed(h, eps: float):
    """``(h**eps - 1) / eps`` (``log h`` at ``eps = 0``): the ``alpha = 0`` compensator."""
    u = np.log(np.asarray(h, dtype=complex))
    z = eps * u
    # the series branch avoids dividing by a subnormal eps
    with np.errstate(all="ignore"):
        out = np.where(np.abs(z) < 1e-8, u * (1 + z / 2 + z * z / 6), np.expm1(z) / (eps or 1.0))
    return _real_if_exact(out[()]) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class Fold:
    w: float
    u: float
    h: float


def fold(eps: float, alpha: float) -> Fold | None:
    """Fold of ``W -> log H~(W)`` on the principal branch (only for ``alpha < 0``)."""
    if alpha >= 0:
        return None
    w = eps - 1.0 / alpha
    u = float(log_h_tilde(w, eps, alpha).real)
    return Fold(w, u, math.exp(u))


# --- root route -------------------------------------------------------------------

def _newton_omega(u: complex, omega: complex, eps: float, alpha: float, *, tol: float = 1e-15,
                  maxiter: int = 60) -> complex:
    """Newton on ``F(omega) = alpha log(-1/omega) + log1p(eps omega)/eps - u``."""
    om = complex(omega)
    if alpha == 0 and om == 0 and u == 0:
        return om
    for _ in range(maxiter):
        if (om == 0 and alpha != 0) or (eps != 0 and 1 + eps * om == 0):
            raise NoConvergence("Newton iterate hit a singular value of omega", operation="omega_root")
        F = complex(_log1p_over(eps, om)) - u
        dF = 1.0 / (1.0 + eps * om)
        if alpha != 0:
            F += alpha * np.log(-1.0 / om)
            dF += -alpha / om
        step = F / dF
        om_new = om - step
        # keep the iterate on the side of 0 it started on
        if om_new.real >= 0 and om.real < 0 and abs(om_new.imag) < 1e-300:
            om_new = 0.5 * om
        if abs(om_new - om) <= tol * max(1.0, abs(om_new)):
            return om_new
        om = om_new
    raise NoConvergence(f"Newton did not converge for u={u}", operation="omega_root",
                        data={"u": u, "omega": om})


@dataclass(frozen=True)
class UPath:
    """Path in the ``u = log h`` plane, ``tau`` in ``[0, 1]``."""

    u: Callable[[float], complex]
    du: Callable[[float], complex]
    u0: complex
    u1: complex

    @classmethod
    def straight(cls, u0, u1) -> "UPath":
        u0, u1 = complex(u0), complex(u1)
        d = u1 - u0
        return cls(lambda t: u0 + t * d, lambda t: d, u0, u1)

    @classmethod
    def upper_arc(cls, u0, u1) -> "UPath":
        """Half circle over the segment ``[u0, u1]`` (through the upper half plane when ``u0 < u1``)."""
        u0, u1 = complex(u0), complex(u1)
        c = 0.5 * (u0 + u1)
        r = 0.5 * (u1 - u0)
        return cls(lambda t: c - r * np.exp(-1j * np.pi * t),
                   lambda t: 1j * np.pi * r * np.exp(-1j * np.pi * t), u0, u1)


def _start_point(eps: float, alpha: float) -> tuple[float, float]:
    """A point ``(W0, u0)`` of the principal branch, ``u0 = log H~(W0)`` evaluated directly."""
    w0 = eps + 1.0
    f = fold(eps, alpha)
    if f is not None:
        w0 = min(w0, eps + 0.5 * (f.w - eps))
    return w0, float(log_h_tilde(w0, eps, alpha).real)


def _principal_path(u_target: complex, eps: float, alpha: float, u_start: float) -> UPath:
    """Path from ``u_start`` to ``u_target`` passing above the fold when it has to."""
    f = fold(eps, alpha)
    ut = complex(u_target)
    if f is not None and ut.imag == 0 and ut.real >= f.u and u_start < f.u:
        return UPath.upper_arc(u_start, ut)
    return UPath.straight(u_start, ut)


def omega_root(h, eps: float, alpha: float, *, steps: int = 16, tol: float = 1e-12):
    """Solve ``H~(-1/omega) = h`` by Newton's method.

    Below the fold (always, when ``alpha >= 0``) the seed is the closed
    form at ``alpha = 0`` and ``alpha`` is continued to its target in
    ``steps`` stages.  Above the fold the root is followed by Newton along
    the half circle in the ``log h`` plane from a point below the fold.
    Raises :class:`NoConvergence` when the final relative residual
    ``|H~(-1/omega) / h - 1|`` exceeds ``tol``.
    """
    h = complex(h)
    if h == 0:
        raise SingularArgument("h must be nonzero", operation="omega_root")
    u = complex(np.log(h))
    f = fold(eps, alpha)
    seed = complex(omega_closed(h.real, eps)) if h.imag == 0 and h.real > 0 else 0j
    # at h = 1 the alpha = 0 seed is omega = 0, a singular point of the equation for alpha != 0
    if h.imag == 0 and h.real > 0 and (f is None or u.real < f.u - 1e-12) and (seed != 0 or alpha == 0):
        om = seed
        for j in range(1, steps + 1):
            om = _newton_omega(u, om, eps, alpha * j / steps)
    else:
        if h.imag == 0 and f is not None and abs(u.real - f.u) <= 1e-12:
            raise NoConvergence(f"h={h.real} is at the fold of the compensator", operation="omega_root")
        w0, u0 = _start_point(eps, alpha)
        path = _principal_path(u, eps, alpha, u0)
        om = -1.0 / w0
        n = max(64, int(8 * abs(u - u0)) + 64)
        for t in np.linspace(0.0, 1.0, n + 1)[1:]:
            om = _newton_omega(path.u(t), om, eps, alpha)
    res = defining_residual(om, h, eps, alpha)
    if not res < tol:
        raise NoConvergence(f"residual {res:.3g} above {tol}", operation="omega_root",
                            data={"h": h, "omega": om})
    if h.imag == 0 and abs(om.imag) <= 1e-14 * abs(om) and (f is None or u.real < f.u):
        return om.real
    return om


def defining_residual(omega, h, eps: float, alpha: float) -> float:
    """``|H~(-1/omega) / h - 1|``."""
    omega = complex(omega)
    if alpha == 0:
        # log H~(-1/omega) = log1p(eps omega) / eps, finite at omega = 0
        lg = complex(_log1p_over(eps, omega)) - complex(np.log(complex(h)))
        return abs(np.expm1(lg))
    if omega == 0:
        return math.inf
    lg = complex(log_h_tilde(-1.0 / omega, eps, alpha)) - complex(np.log(complex(h)))
    return abs(np.expm1(lg))


# --- ODE route ----------------------------------------------------------------------

def _rhs_w(w, eps, alpha):
    return w * (w - eps) / (1.0 + alpha * (w - eps))


def _integrate(rhs, y0: complex, path: UPath, t0: float = 0.0, t1: float = 1.0, *, rtol: float,
               events=None):
    def f(t, y):
        return rhs(y, t) * path.du(t)

    sol = solve_ivp(f, (t0, t1), np.array([complex(y0)]), method="DOP853", rtol=rtol,
                    atol=rtol * 1e-3, events=events)
    if sol.status == -1:
        raise NoConvergence(f"ODE integration failed: {sol.message}", operation="omega_ode")
    return sol


def omega_ode(h, eps: float, alpha: float, *, h0=None, omega0=None, path: UPath | None = None,
              rtol: float = 1e-13):
    """Integrate ``dW/du = W (W - eps) / (1 + alpha (W - eps))`` to ``u = log h``.

    Without ``(h0, omega0)`` the integration starts at a point
    ``W0`` of the principal branch with ``u0 = log H~(W0)`` evaluated
    directly, so no root solve is involved.  ``path`` overrides the
    default route (straight, or above the fold when needed).
    """
    h = complex(h)
    if h == 0:
        raise SingularArgument("h must be nonzero", operation="omega_ode")
    if (h0 is None) != (omega0 is None):
        raise ConfigError("h0 and omega0 must be given together")
    if h0 is None:
        w0, u0 = _start_point(eps, alpha)
    else:
        if omega0 == 0:
            raise SingularArgument("omega0 = 0 is the point at infinity of W", operation="omega_ode")
        w0, u0 = -1.0 / complex(omega0), complex(np.log(complex(h0)))
    ut = complex(np.log(h))
    if path is None:
        path = _principal_path(ut, eps, alpha, u0.real if isinstance(u0, complex) else u0) \
            if complex(u0).imag == 0 else UPath.straight(u0, ut)

    def pole(t, y):
        return abs(1.0 + alpha * (y[0] - eps)) - 1e-8

    pole.terminal = True
    sol = _integrate(lambda y, t: _rhs_w(y, eps, alpha), w0, path, rtol=rtol, events=pole)
    if sol.status == 1:
        raise NoConvergence("path runs into the fold of the compensator", operation="omega_ode")
    w = complex(sol.y[0, -1])
    om = -1.0 / w
    f = fold(eps, alpha)
    if h.imag == 0 and h.real > 0 and (f is None or ut.real < f.u) and path.u(0.5).imag == 0:
        return om.real
    return om


# --- charts -------------------------------------------------------------------------

def w_exponential(u, alpha: float, *, L: float = 5.0, seed=None, tol: float = 1e-15, maxiter: int = 60):
    """Solve ``w**alpha exp(-1/w) = exp(u)`` for ``Re u < -L`` (the ``eps = 0`` chart near ``w = 0``).

    Newton on ``alpha log w - 1/w - u`` from the asymptotic seed ``-1/u``
    (or ``seed``); at ``alpha = 0`` the answer is ``-1/u`` exactly.
    """
    u = complex(u)
    if not u.real < -L:
        raise LeftChartDomain(f"Re u = {u.real} is not below -{L}", operation="w_exponential")
    if alpha == 0:
        return _real_if_exact(-1.0 / u)
    w = complex(seed) if seed is not None else -1.0 / u
    for _ in range(maxiter):
        g = alpha * np.log(w) - 1.0 / w - u
        dg = alpha / w + 1.0 / (w * w)
        step = g / dg
        w_new = w - step
        if abs(w_new - w) <= tol * abs(w_new):
            w = w_new
            break
        w = w_new
    else:
        raise NoConvergence(f"exponential chart Newton failed at u={u}", operation="w_exponential")
    if abs(np.expm1(alpha * np.log(w) - 1.0 / w - u)) > 1e-12:
        raise NoConvergence(f"exponential chart residual too large at u={u}", operation="w_exponential")
    return _real_if_exact(w) if u.imag == 0 and abs(w.imag) < 1e-15 * abs(w) else w


def _chart_rhs(chart: str, eps: float, alpha: float):
    if chart == "S":
        # W = eps Y, s = eps u
        return lambda y, t: eps * y * (y - 1.0) / (1.0 + eps * alpha * (y - 1.0))
    if chart == "E":
        return lambda y, t: _rhs_w(y, eps, alpha)
    if chart == "N":
        # z = 1 / W; the rescaling z -> alpha z, s = u / alpha gives the
        # symmetric form -z (1 - alpha eps z) / (1 + z - alpha eps z)
        return lambda z, t: -z * (1.0 - eps * z) / (z + alpha * (1.0 - eps * z))
    raise ConfigError(f"unknown chart {chart!r}; expected one of {CHARTS}")


def _to_chart(chart: str, w: complex, eps: float) -> complex:
    return {"S": lambda: w / eps, "E": lambda: w, "N": lambda: 1.0 / w}[chart]()


def _from_chart(chart: str, y: complex, eps: float) -> complex:
    return {"S": lambda: eps * y, "E": lambda: y, "N": lambda: 1.0 / y}[chart]()


def _in_chart(chart: str, w: complex, eps: float) -> bool:
    a = abs(w)
    if chart == "S":
        return eps > 0 and a < _S_MAX
    if chart == "E":
        return _E_MIN <= a <= _E_MAX
    return a > _N_MIN


@dataclass
class ChartResult:
    w: complex
    omega: complex
    charts: list = field(default_factory=list)  # (chart, tau_start, tau_end)


def chart_solution(chart: str, eps: float, alpha: float, path: UPath, w0, *, rtol: float = 1e-13,
                   t0: float = 0.0, t1: float = 1.0) -> ChartResult:
    """Integrate the compensator equation in one chart along ``path`` from ``W(t0) = w0``.

    Charts: ``S`` (``W = eps Y``, ``s = eps u``; needs ``eps > 0`` and
    ``|W| < 1``), ``E`` (``W`` itself on ``1/4 <= |W| <= 4``) and ``N``
    (``z = 1/W`` on ``|W| > 1``).  Raises :class:`LeftChartDomain` if the
    solution leaves the chart.
    """
    w0 = complex(w0)
    if chart not in CHARTS:
        raise ConfigError(f"unknown chart {chart!r}; expected one of {CHARTS}")
    if chart == "S" and eps <= 0:
        raise ConfigError("the S chart needs eps > 0; use w_exponential at eps = 0")
    if not _in_chart(chart, w0, eps):
        raise LeftChartDomain(f"W0={w0} is outside chart {chart}", operation="chart_solution")
    rhs = _chart_rhs(chart, eps, alpha)
    lo, hi = {"S": (0.0, _S_MAX), "E": (_E_MIN, _E_MAX), "N": (_N_MIN, math.inf)}[chart]

    def leave(t, y):
        a = abs(_from_chart(chart, complex(y[0]), eps))
        return min(a - lo if lo > 0 else 1.0, hi - a if math.isfinite(hi) else 1.0)

    leave.terminal = True
    leave.direction = -1
    sol = _integrate(rhs, _to_chart(chart, w0, eps), path, t0, t1, rtol=rtol, events=leave)
    w = _from_chart(chart, complex(sol.y[0, -1]), eps)
    if sol.status == 1:
        raise LeftChartDomain(f"solution left chart {chart} at tau={sol.t[-1]:.6g}", operation="chart_solution",
                              data={"tau": float(sol.t[-1]), "w": w})
    return ChartResult(w, -1.0 / w, [(chart, t0, t1)])


def _preferred_chart(w: complex, eps: float, u: complex, L: float) -> str:
    a = abs(w)
    if a < 0.5:
        if eps > 0:
            return "S"
        return "X"
    if a > 2.0:
        return "N"
    return "E"


def omega_chart(h, eps: float, alpha: float, *, rtol: float = 1e-13, L: float = 5.0,
                path: UPath | None = None, max_switches: int = 100) -> ChartResult:
    """``omega(h)`` by integrating in whichever chart suits the current ``W``.

    Starts from the same directly evaluated point as :func:`omega_ode` and
    switches charts (with hysteresis) when ``|W|`` crosses 0.8 / 1.25 / 0.4 / 2.5.
    ``X`` denotes the ``eps = 0`` exponential chart, evaluated pointwise by
    :func:`w_exponential`.
    """
    h = complex(h)
    w0, u0 = _start_point(eps, alpha)
    ut = complex(np.log(h))
    path = path or _principal_path(ut, eps, alpha, u0)
    t = 0.0
    w = complex(w0)
    used = []
    bounds = {"S": (0.0, 0.8), "E": (0.4, 2.5), "N": (1.25, math.inf)}
    for _ in range(max_switches):
        chart = _preferred_chart(w, eps, path.u(t), L)
        lo_override = None
        if chart == "X":
            # the exponential chart is exact pointwise: jump to the end if it stays valid
            if complex(path.u(1.0)).real < -L:
                w = complex(w_exponential(path.u(1.0), alpha, L=L, seed=w))
                used.append(("X", t, 1.0))
                t = 1.0
                break
            # eps = 0: the only singularity is W = 0, so the annulus chart may extend inward
            chart, lo_override = "E", 0.5 * abs(w)
        lo, hi = bounds[chart]
        if lo_override is not None:
            lo = lo_override
        rhs = _chart_rhs(chart, eps, alpha)

        def leave(tt, y, chart=chart, lo=lo, hi=hi):
            a = abs(_from_chart(chart, complex(y[0]), eps))
            return min(a - lo if lo > 0 else 1.0, hi - a if math.isfinite(hi) else 1.0)

        leave.terminal = True
        leave.direction = -1
        sol = _integrate(rhs, _to_chart(chart, w, eps), path, t, 1.0, rtol=rtol, events=leave)
        w = _from_chart(chart, complex(sol.y[0, -1]), eps)
        used.append((chart, t, float(sol.t[-1])))
        t = float(sol.t[-1])
        if sol.status == 0:
            break
    else:
        raise NoConvergence("too many chart switches", operation="omega_chart")
    om = -1.0 / w
    f = fold(eps, alpha)
    if h.imag == 0 and h.real > 0 and (f is None or ut.real < f.u):
        om = om.real
        w = w.real
    return ChartResult(w, om, used)


# --- checks -------------------------------------------------------------------------

def pfaffian_residual(omega_fn: Callable[[float], complex], h: float, eps: float, alpha: float,
                      *, rel_step: float = 2e-4) -> float:
    """``|h * (alpha (-1 - eps w) + w) / (w (1 + eps w)) * dw/dh - 1|`` with a 5-point derivative."""
    d = rel_step * h
    vals = [complex(omega_fn(h + k * d)) for k in (-2, -1, 1, 2)]
    dw = (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * d)
    w = complex(omega_fn(h))
    lhs = (alpha * (-1.0 - eps * w) + w) / (w * (1.0 + eps * w)) * dw
    return abs(lhs * h - 1.0)


@dataclass
class BijectionReport:
    eps: float
    alpha: float
    monotone: bool
    min_increment: float
    samples: int
    real_up_to: float  # largest sampled h where omega is real
    violations: list = field(default_factory=list)


def check_bijection(eps: float, alpha: float, *, n: int = 400, h_min: float = 1e-6) -> BijectionReport:
    """Sample ``h -> -1/omega(h)`` on ``[h_min, 1]`` and report strict monotonicity.

    Only the real part of the principal branch is meaningful; above a fold
    the map is not real and the report is negative.
    """
    hs = np.geomspace(h_min, 1.0, n)
    vals = []
    real_up_to = 0.0
    for h in hs:
        try:
            om = omega_root(h, eps, alpha)
        except NoConvergence:
            vals.append(np.nan)
            continue
        if isinstance(om, complex):
            vals.append(np.nan)
            continue
        real_up_to = float(h)
        vals.append(-1.0 / om if om != 0 else np.inf)
    v = np.array(vals, dtype=float)
    d = np.diff(v)
    bad = [float(hs[i]) for i in np.flatnonzero(~(d > 0))]
    return BijectionReport(eps, alpha, not bad, float(np.nanmin(d)) if np.any(np.isfinite(d)) else math.nan,
                           n, real_up_to, bad)


@dataclass
class ContinuityReport:
    alpha: float
    h: np.ndarray
    eps: np.ndarray
    ratios: np.ndarray  # |omega(h, eps) - omega(h, 0)| / eps, shape (len(h), len(eps))
    fitted_c: np.ndarray  # per h: least-squares C in |d omega| = C eps
    slopes: np.ndarray  # per h: log-log slope of |d omega| against eps
    spread: np.ndarray  # per h: max/min of the ratios over eps


def eps_continuity(alpha: float, hs, eps_values, *, route: Callable = omega_root) -> ContinuityReport:
    """Probe Lipschitz dependence of ``omega`` on ``eps`` at ``eps = 0``."""
    hs = np.asarray(hs, dtype=float)
    ev = np.asarray(eps_values, dtype=float)
    ratios = np.empty((len(hs), len(ev)))
    for i, h in enumerate(hs):
        base = complex(route(h, 0.0, alpha))
        for j, e in enumerate(ev):
            ratios[i, j] = abs(complex(route(h, e, alpha)) - base) / e
    diffs = ratios * ev[None, :]
    fitted = (diffs @ ev) / float(ev @ ev)
    slopes = np.array([np.polyfit(np.log(ev), np.log(d), 1)[0] for d in diffs])
    spread = ratios.max(axis=1) / ratios.min(axis=1)
    return ContinuityReport(alpha, hs, ev, ratios, fitted, slopes, spread)
