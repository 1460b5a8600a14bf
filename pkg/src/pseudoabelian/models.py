"""Local normal forms near the corners of a polycycle: linear saddle and saddle-node.

Both are used as fixtures for the transport machinery: in these charts the
quantities that a modulus-decreasing continuation must not increase
(``|x|``, ``|y|`` for the saddle; ``|y|`` and ``|H~(x)|`` for the
saddle-node) can be read off directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp

from .cycles import Cycle
from .errors import ConfigError, CycleNotInBidisc, DomainError
from .foliation import Foliation, FoliationState, log1p_over
from .transport import HPath, TransportControls, transport

__all__ = [
    "SaddleModel",
    "SaddleNodeModel",
    "SaddleFoliation",
    "SaddleNodeFoliation",
    "saddle_model_arc",
    "saddle_model_circle",
    "saddle_node_model_arc",
    "saddle_node_model_first_integral",
    "small_bidisc_margin",
    "push_from_weak_manifold",
    "PushResult",
    "SaddleCheckReport",
    "saddle_model_transport_check",
    "random_inward_path",
]


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


# --- saddle ---------------------------------------------------------------------

@dataclass(frozen=True)
class SaddleModel:
    """``x' = lambda1 x, y' = -lambda2 y`` with ``H = x**(1/lambda1) y**(1/lambda2)``."""

    lambda1: float = 1.0
    lambda2: float = 1.0

    def __post_init__(self):
        if not (self.lambda1 > 0 and self.lambda2 > 0):
            raise ConfigError(f"saddle eigenvalues must be positive: {self.lambda1}, {self.lambda2}")

    def foliation(self, lift: str = "gradient") -> "SaddleFoliation":
        return SaddleFoliation(self, lift)


class SaddleFoliation(Foliation):
    """``log H = log x / lambda1 + log y / lambda2``.

    ``lift="gradient"`` uses the minimal-norm lift; ``lift="glued"`` uses
    ``phi v_x + (1 - phi) v_y`` with ``v_x = lambda1 x d/dx``,
    ``v_y = lambda2 y d/dy`` and ``phi`` a smooth weight equal to 1 near
    ``{|y| = 1}`` and 0 near ``{|x| = 1}``.  Both satisfy
    ``d log H (L) = 1`` and neither increases ``|x|`` or ``|y|`` when moved
    along a direction with negative real part.
    """

    def __init__(self, model: SaddleModel, lift: str = "gradient"):
        if lift not in ("gradient", "glued"):
            raise ConfigError(f"unknown lift {lift!r}")
        self.model = model
        self.lift_mode = lift
        self.names = ["x", "y"]
        self.coef = np.array([1.0 / model.lambda1, 1.0 / model.lambda2])

    def evaluate(self, P: np.ndarray) -> FoliationState:
        P = np.asarray(P, dtype=complex).reshape(-1, 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            theta = np.column_stack([self.coef[0] / P[:, 0], self.coef[1] / P[:, 1]])
        return FoliationState(P.copy(), None, theta)

    def lift(self, P: np.ndarray, st: FoliationState) -> np.ndarray:
        if self.lift_mode == "gradient":
            return super().lift(P, st)
        ax, ay = np.abs(P[:, 0]), np.abs(P[:, 1])
        phi = _smoothstep((ay - ax + 0.25) / 0.5)
        vx = np.column_stack([self.model.lambda1 * P[:, 0], np.zeros(len(P))])
        vy = np.column_stack([np.zeros(len(P)), self.model.lambda2 * P[:, 1]])
        return phi[:, None] * vx + (1.0 - phi)[:, None] * vy

    def value(self, P: np.ndarray) -> np.ndarray:
        P = np.asarray(P, dtype=complex).reshape(-1, 2)
        return np.exp(self.log_h(self.principal_logs(self.evaluate(P))))


def saddle_model_arc(model: SaddleModel, h0: float, n: int = 65) -> Cycle:
    """Real leaf ``{H = h0}`` between the transversals ``{y = 1}`` and ``{x = 1}``."""
    if not 0 < h0 < 1:
        raise ConfigError(f"h0 must lie in (0, 1), got {h0}")
    l1, l2 = model.lambda1, model.lambda2
    # x^(1/l1) y^(1/l2) = h0: log x runs from l1 log h0 (y = 1) to 0 (x = 1)
    s = np.linspace(l1 * math.log(h0), 0.0, n)
    x = np.exp(s)
    y = np.exp(l2 * (math.log(h0) - s / l1))
    fol = model.foliation()
    pts = np.column_stack([x, y]).astype(complex)
    return Cycle(pts, math.log(h0), closed=False, logs=fol.principal_logs(fol.evaluate(pts)))


def saddle_model_circle(model: SaddleModel, h0: complex, r: float, n: int = 128) -> Cycle:
    """Closed cycle ``{|x| = r}`` on ``{H = h0}``; it generates the homology of the leaf."""
    l1, l2 = model.lambda1, model.lambda2
    phi = 2 * np.pi * np.arange(n) / n
    lx = math.log(r) + 1j * phi
    ly = l2 * (complex(np.log(h0)) - lx / l1)
    pts = np.column_stack([np.exp(lx), np.exp(ly)])
    logs = np.column_stack([lx, ly, np.zeros(n)])
    return Cycle(pts, complex(np.log(h0)), closed=True, logs=logs)


# --- saddle-node ------------------------------------------------------------------

@dataclass(frozen=True)
class SaddleNodeModel:
    """``x' = -x**2 + eps**2, y' = y (1 + alpha (x - eps))`` on the unit bidisc."""

    eps: float = 0.0
    alpha: float = 0.0

    def __post_init__(self):
        if not 0 <= self.eps < 1:
            raise ConfigError(f"eps must lie in [0, 1), got {self.eps}")

    def foliation(self) -> "SaddleNodeFoliation":
        return SaddleNodeFoliation(self)

    def log_htilde(self, x) -> np.ndarray:
        """Principal ``log H~(x)``; ``H~ = (x+eps)**alpha ((x-eps)/(x+eps))**(1/(2 eps))``."""
        x = np.asarray(x, dtype=complex)
        e, a = self.eps, self.alpha
        with np.errstate(divide="ignore", invalid="ignore"):
            if e == 0:
                return a * np.log(x) - 1.0 / x
            return a * np.log(x + e) + log1p_over(2 * e, -1.0 / (x + e))

    def vector_field(self, P: np.ndarray) -> np.ndarray:
        P = np.asarray(P, dtype=complex).reshape(-1, 2)
        x, y = P[:, 0], P[:, 1]
        return np.column_stack([-x * x + self.eps ** 2, y * (1 + self.alpha * (x - self.eps))])

    def v_x(self, P: np.ndarray) -> np.ndarray:
        """``(x**2 - eps**2) / (1 + alpha (x - eps)) d/dx``: raises ``log H~`` at unit rate."""
        x = np.asarray(P, dtype=complex).reshape(-1, 2)[:, 0]
        return np.column_stack([(x * x - self.eps ** 2) / (1 + self.alpha * (x - self.eps)),
                                np.zeros(len(x))])

    def v_y(self, P: np.ndarray) -> np.ndarray:
        """``y d/dy``."""
        y = np.asarray(P, dtype=complex).reshape(-1, 2)[:, 1]
        return np.column_stack([np.zeros(len(y)), y])


class SaddleNodeFoliation(Foliation):
    """``log H = log y + alpha log(x + eps) + log1p(-2 eps / (x + eps)) / (2 eps)``."""

    def __init__(self, model: SaddleNodeModel):
        self.model = model
        self.names = ["y", "x+eps"]
        self.coef = np.array([1.0, model.alpha])
        self.near_scale = 2.0 * model.eps
        self.near_name = "x-eps"

    def evaluate(self, P: np.ndarray) -> FoliationState:
        P = np.asarray(P, dtype=complex).reshape(-1, 2)
        e, a = self.model.eps, self.model.alpha
        x, y = P[:, 0], P[:, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            g = -1.0 / (x + e)
            tx = (1 + a * (x - e)) / (x * x - e * e)
            ty = 1.0 / y
        return FoliationState(np.column_stack([y, x + e]), g, np.column_stack([tx, ty]))


def saddle_node_model_first_integral(model: SaddleNodeModel, point, *, branch_tol: float = 1e-12) -> complex:
    """Principal branch of ``H = y H~(x)``; at ``eps = 0`` this is ``y x**alpha exp(-1/x)``."""
    x, y = (complex(v) for v in point)
    e = model.eps
    if abs(x - e) < branch_tol or abs(x + e) < branch_tol:
        raise DomainError(f"x = {x} is at a branch point (+-{e})", operation="saddle_node_model_first_integral")
    return complex(y * np.exp(model.log_htilde(x)))


def small_bidisc_margin(model: SaddleNodeModel, P: np.ndarray) -> np.ndarray:
    """``min(log|H~(1)| - log|H~(x)|, -log|y|)`` per point; nonnegative inside the small bidisc."""
    P = np.asarray(P, dtype=complex).reshape(-1, 2)
    lht = model.log_htilde(P[:, 0]).real
    ref = float(model.log_htilde(1.0).real)
    with np.errstate(divide="ignore"):
        return np.minimum(ref - lht, -np.log(np.abs(P[:, 1])))


def saddle_node_model_arc(model: SaddleNodeModel, h0: float, n: int = 129, x_max: float = 1.0) -> Cycle:
    """Real leaf ``{H = h0}`` from the transversal ``{y = 1}`` to ``{x = x_max}``."""
    fol = model.foliation()
    lh = math.log(h0)

    def f(s):
        return float(model.log_htilde(s).real) - lh

    from scipy.optimize import brentq

    lo = model.eps + 1e-14
    if f(x_max) <= 0:
        raise ConfigError(f"h0={h0} too large: the leaf does not reach x={x_max} inside |y| <= 1")
    x0 = brentq(f, lo + 1e-12 if f(lo + 1e-12) < 0 else lo, x_max, xtol=1e-15)
    # equal steps in log H~ spread markers evenly along the arc
    u = np.linspace(lh, float(model.log_htilde(x_max).real), n)
    xs = np.empty(n)
    xs[0], xs[-1] = x0, x_max
    for k in range(1, n - 1):
        xs[k] = brentq(lambda s: float(model.log_htilde(s).real) - u[k], x0, x_max, xtol=1e-15)
    ys = np.exp(lh - u)
    pts = np.column_stack([xs, ys]).astype(complex)
    return Cycle(pts, lh, closed=False, logs=fol.principal_logs(fol.evaluate(pts)))


@dataclass
class PushResult:
    cycle: Cycle
    flow_time: float
    c: float  # distance of the input cycle to {y = 0}
    min_abs_y: float
    level_residual: float
    htilde_increase: float  # largest increase of log|H~| over markers (should be <= 0)


def push_from_weak_manifold(model: SaddleNodeModel, cycle: Cycle, delta: float, *,
                            rtol: float = 1e-12, atol: float = 1e-14) -> PushResult:
    """Flow the markers by ``V = psi(|y|) (v_y - v_x)`` for time ``log(delta / c)``.

    ``psi`` is 1 on ``|y| <= delta`` and 0 on ``|y| >= 2 delta`` (smoothstep
    in between), ``c = min |y|`` over the markers.  Since ``dH(V) = 0`` the
    level is unchanged, ``|y|`` grows like ``e**t`` where ``psi = 1`` and
    ``log |H~|`` decreases, so the pushed cycle stays in the small bidisc
    and avoids ``{|y| < delta}``.
    """
    if not 0 < delta < 0.5:
        raise ConfigError(f"delta must lie in (0, 1/2), got {delta}")
    P0 = np.asarray(cycle.points, dtype=complex)
    if np.any(small_bidisc_margin(model, P0) < -1e-12):
        raise CycleNotInBidisc("cycle leaves the bidisc |H~(x)| <= |H~(1)|, |y| <= 1",
                               operation="push_from_weak_manifold")
    fol = model.foliation()
    logs0 = cycle.logs if cycle.logs is not None else fol.principal_logs(fol.evaluate(P0))
    c = float(np.min(np.abs(P0[:, 1])))
    if c <= 0:
        raise DomainError("cycle meets {y = 0}", operation="push_from_weak_manifold")
    M = math.log(delta / c)
    lht0 = model.log_htilde(P0[:, 0]).real
    if M <= 0:
        res = cycle.level_residual(fol) if cycle.logs is not None else 0.0
        return PushResult(cycle.copy(), 0.0, c, c, res, 0.0)
    n = len(P0)
    e, a = model.eps, model.alpha

    # state: x, y and the three logarithms (y, x+eps, near factor), split into re/im
    def rhs(_t, s):
        z = s[: 5 * n] + 1j * s[5 * n:]
        x, y = z[:n], z[n:2 * n]
        psi = 1.0 - _smoothstep((np.abs(y) - delta) / delta)
        den = 1 + a * (x - e)
        dx = -psi * (x * x - e * e) / den
        dy = psi * y
        dly = psi
        dlx = -psi * (x - e) / den
        dln = -psi / den
        d = np.concatenate([dx, dy, dly * np.ones(n), dlx, dln])
        return np.concatenate([d.real, d.imag])

    z0 = np.concatenate([P0[:, 0], P0[:, 1], logs0[:, 0], logs0[:, 1], logs0[:, 2]])
    sol = solve_ivp(rhs, (0.0, M), np.concatenate([z0.real, z0.imag]), method="DOP853",
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise DomainError(f"pushing flow failed: {sol.message}", operation="push_from_weak_manifold")
    zf = sol.y[: 5 * n, -1] + 1j * sol.y[5 * n:, -1]
    pts = np.column_stack([zf[:n], zf[n:2 * n]])
    logs = np.column_stack([zf[2 * n:3 * n], zf[3 * n:4 * n], zf[4 * n:]])
    out = replace(cycle, points=pts, logs=logs, meta=dict(cycle.meta, pushed=M))
    lht1 = model.log_htilde(pts[:, 0]).real
    return PushResult(out, M, c, float(np.min(np.abs(pts[:, 1]))), out.level_residual(fol),
                      float(np.max(lht1 - lht0)))


# --- transport checks on the saddle -------------------------------------------------

@dataclass
class SaddleCheckReport:
    passed: bool
    max_increase_abs_x: float  # largest per-marker increase of |x| over one step
    max_increase_abs_y: float
    max_abs_x: list = field(default_factory=list)  # per-step maxima over the cycle
    max_abs_y: list = field(default_factory=list)
    level_residual: float = 0.0
    steps: int = 0
    slack: float = 1e-8


def saddle_model_transport_check(model: SaddleModel, h0: float, path: HPath, *, lift: str = "gradient",
                                 slack: float = 1e-8, n_markers: int = 65,
                                 controls: TransportControls | None = None,
                                 cycle: Cycle | None = None) -> SaddleCheckReport:
    """Transport the real model arc along ``path`` and watch ``|x|``, ``|y|`` at every marker.

    ``path`` must start at ``h0`` and have ``|rho|' < 0``.  The check passes
    when no marker ever gains more than ``slack`` (relative) in ``|x|`` or
    ``|y|`` over one accepted step.
    """
    if not path.is_constant() and not path.modulus_decreasing():
        raise ConfigError("path must have |rho|' < 0")
    fol = model.foliation(lift)
    cyc = cycle if cycle is not None else saddle_model_arc(model, h0, n_markers)
    if abs(path.start - cyc.log_level) > 1e-12 * max(1.0, abs(cyc.log_level)):
        raise ConfigError("path does not start at the cycle level")
    ctrl = controls or TransportControls(max_spacing=0.05, min_markers=n_markers)
    inc_x = inc_y = 0.0
    mx = [float(np.max(np.abs(cyc.points[:, 0])))]
    my = [float(np.max(np.abs(cyc.points[:, 1])))]

    def monitor(_t, old, new):
        nonlocal inc_x, inc_y
        ax0, ay0 = np.abs(old[:, 0]), np.abs(old[:, 1])
        inc_x = max(inc_x, float(np.max((np.abs(new[:, 0]) - ax0) / ax0)))
        inc_y = max(inc_y, float(np.max((np.abs(new[:, 1]) - ay0) / ay0)))
        mx.append(float(np.max(np.abs(new[:, 0]))))
        my.append(float(np.max(np.abs(new[:, 1]))))

    res = transport(fol, cyc, path, ctrl, monitor=monitor)
    ok = inc_x <= slack and inc_y <= slack
    return SaddleCheckReport(ok, inc_x, inc_y, mx, my, res.cycle.level_residual(fol), res.steps, slack)


def random_inward_path(rng: np.random.Generator, h0: float, *, degree: int = 3,
                       max_turn: float = 2 * np.pi, shrink_range=(0.05, 0.9)) -> HPath:
    """Random ``ell(t) = log h0 + sum c_k t**k`` with ``Re ell'`` strictly negative on ``[0, 1]``.

    The real part is a random decreasing polynomial (positive derivative
    coefficients, negated); the imaginary part is an arbitrary polynomial
    with total swing below ``max_turn``.
    """
    target = rng.uniform(*shrink_range)
    w = rng.uniform(0.2, 1.0, degree)
    # Re ell'(t) = -sum w_k (k+1) t^k * scale, so Re ell(1) - Re ell(0) = log(1 - target)
    scale = -math.log1p(-target) / float(np.sum(w))
    re = -scale * w
    im = rng.uniform(-1.0, 1.0, degree)
    im *= max_turn / max(float(np.sum(np.abs(im))), 1e-12)
    return HPath.log_polynomial(math.log(h0), re + 1j * im)
