"""Counting and bounding zeros.

Argument-principle counts on sector contours, growth exponents, the
leading-term classifier for ``I(h)`` at ``h -> 0``, zero counts after the
substitution ``w = -1/omega``, the uniformity experiment over ``(eps, alpha)``
grids and the series fit of iterated variations in ``w``.

Sectors ``{r_in < |h| < r_out, |arg h| <= a pi}`` are handled in the log
chart ``u = log h``, where they become rectangles; functions may be given
in either chart so multi-valued ones (``a >= 1``) are unambiguous.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .compensator import h_tilde, omega_root
from .darboux import DarbouxSystem, OneForm, UnfoldingParams
from .errors import (
    ConfigError,
    FitError,
    MonotonicityFailure,
    NonIntegerWinding,
    UndersampledPhase,
    ZeroOnContour,
)
from .foliation import darboux_foliation
from .integrator import h_grid, integrate_form_detailed, sweep
from .tracer import NestInfo, TraceTolerances, interior_extremum, trace_oval
from .transport import HPath, TransportControls, VarSpec, _controls_for, iterated_var_samples, transport

__all__ = [
    "MAX_PHASE_JUMP",
    "ROUNDING_GUARD",
    "CLASSIFY_THRESHOLD",
    "SectorContour",
    "WindingReport",
    "argument_increment",
    "sampled_increment",
    "sector_winding",
    "sector_zero_count",
    "GrowthFit",
    "growth_exponent",
    "ArcReport",
    "integral_on_arc",
    "small_arc_check",
    "LeadingTermFit",
    "fit_leading_term",
    "leading_term_values",
    "CompositeZeros",
    "composite_zeros",
    "count_zeros_of_compensator_composite",
    "real_sign_changes",
    "UniformityTable",
    "uniformity_experiment",
    "VariationFit",
    "fit_laurent",
    "analyze_variation",
    "variation_fit",
]

MAX_PHASE_JUMP = math.pi / 2
ROUNDING_GUARD = 0.1
CLASSIFY_THRESHOLD = 0.05


# --- argument principle -----------------------------------------------------------------

def argument_increment(values, *, max_jump: float = MAX_PHASE_JUMP) -> float:
    """Unwrapped phase change along an ordered list of samples of ``f``.

    Adjacent samples must differ in phase by less than ``max_jump``;
    otherwise the unwrapping is ambiguous and :class:`UndersampledPhase`
    is raised.  A zero (or non-finite) sample raises :class:`ZeroOnContour`.
    """
    v = np.asarray(values, dtype=complex).ravel()
    if len(v) < 2:
        return 0.0
    bad = ~np.isfinite(v) | (v == 0)
    if np.any(bad):
        raise ZeroOnContour(f"f vanishes or is not finite at sample {int(np.flatnonzero(bad)[0])}",
                            operation="argument_increment")
    jumps = np.angle(v[1:] / v[:-1])
    worst = int(np.argmax(np.abs(jumps)))
    if abs(jumps[worst]) >= max_jump:
        raise UndersampledPhase(f"phase jump {jumps[worst]:.3g} between samples {worst} and {worst + 1}",
                                operation="argument_increment", data={"index": worst})
    return float(np.sum(jumps))


def sampled_increment(f: Callable, param: Callable, t0: float, t1: float, *, n0: int = 64,
                      max_points: int = 200000, max_jump: float = MAX_PHASE_JUMP):
    """Phase change of ``f(param(t))`` for ``t`` from ``t0`` to ``t1`` with adaptive sampling.

    Intervals whose phase jump reaches ``max_jump`` are bisected until all
    jumps are below it.  ``f`` must accept arrays.  Returns
    ``(increment, t_samples, values)``.
    """
    t = np.linspace(t0, t1, max(n0, 2))
    v = np.asarray(f(param(t)), dtype=complex)
    while True:
        bad = ~np.isfinite(v) | (v == 0)
        if np.any(bad):
            z = param(t[np.flatnonzero(bad)[0]])
            raise ZeroOnContour(f"f vanishes on the contour near {complex(z):.6g}",
                                operation="sampled_increment", data={"point": complex(z)})
        jumps = np.abs(np.angle(v[1:] / v[:-1]))
        idx = np.flatnonzero(jumps >= 0.9 * max_jump)
        if len(idx) == 0:
            return argument_increment(v, max_jump=max_jump), t, v
        if len(t) + len(idx) > max_points:
            raise UndersampledPhase(f"more than {max_points} samples needed to resolve the phase",
                                    operation="sampled_increment")
        tm = 0.5 * (t[idx] + t[idx + 1])
        vm = np.asarray(f(param(tm)), dtype=complex)
        t = np.insert(t, idx + 1, tm)
        v = np.insert(v, idx + 1, vm)


@dataclass(frozen=True)
class SectorContour:
    """Boundary of ``{r_inner < |h| < r_outer, |arg h| <= half_angle * pi}``, positively oriented.

    ``half_angle`` is in units of ``pi``.  The four sides, in order: outer
    arc (counterclockwise), upper ray (inward), inner arc (clockwise),
    lower ray (outward).  Parametrizations are in ``u = log h``.
    """

    r_inner: float
    r_outer: float
    half_angle: float = 1.0
    n: int = 64

    def __post_init__(self):
        if not 0 < self.r_inner < self.r_outer:
            raise ConfigError(f"need 0 < r_inner < r_outer, got {self.r_inner}, {self.r_outer}")
        if not self.half_angle > 0:
            raise ConfigError(f"half angle must be positive, got {self.half_angle}")

    def sides(self):
        """``(name, u(t))`` for ``t`` in ``[0, 1]``; each ``u`` accepts arrays."""
        lo, hi = math.log(self.r_inner), math.log(self.r_outer)
        ph = self.half_angle * math.pi
        return [
            ("outer", lambda t: hi + 1j * ph * (2 * np.asarray(t) - 1)),
            ("upper", lambda t: hi + (lo - hi) * np.asarray(t) + 1j * ph),
            ("inner", lambda t: lo + 1j * ph * (1 - 2 * np.asarray(t))),
            ("lower", lambda t: lo + (hi - lo) * np.asarray(t) - 1j * ph),
        ]

    def contains(self, h) -> np.ndarray:
        """Membership of points given in the ``h`` chart (principal argument)."""
        h = np.asarray(h, dtype=complex)
        return (np.abs(h) > self.r_inner) & (np.abs(h) < self.r_outer) & (
            np.abs(np.angle(h)) <= self.half_angle * math.pi)


@dataclass
class WindingReport:
    count: int
    winding: float
    increments: dict
    samples: int
    attempts: int


def _chart_fn(f: Callable, log_chart: bool) -> Callable:
    if log_chart:
        return lambda u: f(np.asarray(u, dtype=complex))
    return lambda u: f(np.exp(np.asarray(u, dtype=complex)))


def sector_winding(f: Callable, contour: SectorContour, *, log_chart: bool = False, retries: int = 2,
                   max_points: int = 200000) -> WindingReport:
    """Argument-principle count of zeros of ``f`` inside ``contour``.

    ``f`` takes ``h`` (or ``u = log h`` with ``log_chart``) and must accept
    arrays.  The winding is rounded when within :data:`ROUNDING_GUARD` of
    an integer; otherwise sampling is made denser ``retries`` times before
    :class:`NonIntegerWinding` is raised.
    """
    g = _chart_fn(f, log_chart)
    n0 = contour.n
    for attempt in range(retries + 1):
        incs = {}
        total_samples = 0
        for name, side in contour.sides():
            inc, t, _ = sampled_increment(g, side, 0.0, 1.0, n0=n0, max_points=max_points)
            incs[name] = inc
            total_samples += len(t)
        w = sum(incs.values()) / (2 * math.pi)
        k = round(w)
        if abs(w - k) <= ROUNDING_GUARD:
            return WindingReport(int(k), w, incs, total_samples, attempt + 1)
        n0 *= 4
    raise NonIntegerWinding(f"winding {w:.6g} is not within {ROUNDING_GUARD} of an integer",
                            operation="sector_zero_count", data={"winding": w})


def sector_zero_count(f: Callable, contour: SectorContour, *, log_chart: bool = False, **kw) -> int:
    """Number of zeros of ``f`` in the sector, counted with multiplicity."""
    return sector_winding(f, contour, log_chart=log_chart, **kw).count


# --- growth and small arcs -------------------------------------------------------------------

@dataclass
class GrowthFit:
    N: float
    stderr: float
    band: tuple[float, float]
    intercept: float
    n: int


def growth_exponent(radii, values) -> GrowthFit:
    """Least-squares slope ``N`` of ``log|I|`` against ``-log|h|``, so ``|I| ~ C |h|^-N``.

    ``band`` is ``N +- 2 stderr``.  Radii must shrink strictly.
    """
    r = np.abs(np.asarray(radii, dtype=complex))
    v = np.abs(np.asarray(values, dtype=complex))
    if len(r) < 3 or len(r) != len(v):
        raise FitError("at least 3 samples of matching length are required", operation="growth_exponent")
    if not np.all(np.diff(r) < 0):
        raise FitError("radii must shrink strictly", operation="growth_exponent")
    if not np.all(np.isfinite(v)) or np.any(v == 0):
        raise FitError("|I| must be finite and nonzero at every sample", operation="growth_exponent")
    x = -np.log(r)
    y = np.log(v)
    X = np.column_stack([np.ones_like(x), x])
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < 2:
        raise FitError("degenerate radii", operation="growth_exponent")
    resid = y - X @ coef
    dof = max(len(x) - 2, 1)
    s2 = float(resid @ resid) / dof
    se = math.sqrt(s2 / float(np.sum((x - x.mean()) ** 2)))
    N = float(coef[1])
    return GrowthFit(N, se, (N - 2 * se, N + 2 * se), float(coef[0]), len(x))


@dataclass
class ArcReport:
    r: float
    half_angle: float
    phi: np.ndarray
    values: np.ndarray
    increment: float


def integral_on_arc(sys: DarbouxSystem, params: UnfoldingParams, eta: OneForm, r: float, *,
                    half_angle: float = 1.0, n: int = 32, controls: TransportControls | None = None,
                    tolerances: TraceTolerances | None = None, nest: NestInfo | None = None,
                    rtol: float = 1e-12, max_rounds: int = 3) -> ArcReport:
    """``I(r e^{i phi})`` for ``phi`` from ``+a pi`` down to ``-a pi`` and its phase change.

    The real oval at ``r`` is continued along the two half arcs; the arc is
    traversed clockwise, as in the small-arc bound.  The number of
    snapshots is doubled (up to ``max_rounds`` times) until consecutive
    phase jumps are below :data:`MAX_PHASE_JUMP`.
    """
    nest = nest or interior_extremum(sys, params)
    if not 0 < r < nest.b:
        raise ConfigError(f"radius {r} is outside the nest (0, {nest.b})")
    fol = darboux_foliation(sys, params)
    ctrl = _controls_for(sys, controls)
    cyc = trace_oval(sys, params, r, tolerances, nest=nest)
    ph = half_angle * math.pi
    m = n
    for _ in range(max_rounds + 1):
        snaps = list(np.linspace(0.0, 1.0, m + 1))
        halves = []
        for sgn in (1, -1):
            path = HPath.log_linear(cyc.log_level, cyc.log_level + 1j * sgn * ph)
            res = transport(fol, cyc, path, ctrl, snapshots=snaps)
            halves.append([integrate_form_detailed(res.snapshots[s], sys, params, eta, rtol=rtol,
                                                   foliation=fol).value for s in snaps])
        up, down = halves
        values = np.array(up[::-1] + down[1:])
        phi = np.concatenate([ph * np.array(snaps[::-1]), -ph * np.array(snaps[1:])])
        try:
            inc = argument_increment(values)
        except UndersampledPhase:
            m *= 2
            continue
        return ArcReport(float(r), half_angle, phi, values, inc)
    raise UndersampledPhase(f"phase along |h|={r} unresolved with {m} snapshots per half arc",
                            operation="integral_on_arc")


def small_arc_check(increment: float, growth: GrowthFit, half_angle: float = 1.0, *,
                    margin: float = 0.5) -> tuple[bool, float]:
    """Test ``increment <= 2 N' A`` with ``N' = N + margin`` and ``A = half_angle * pi`` radians."""
    bound = 2 * (growth.N + margin) * half_angle * math.pi
    return bool(increment <= bound), bound


# --- leading-term classifier --------------------------------------------------------------

@dataclass
class LeadingTermFit:
    """Leading term of ``I`` at ``h -> 0``.

    ``model`` is ``"power_log"`` for ``C h^alpha (log h)^k``,
    ``"inverse_log"`` for ``C (log h)^-k (log(-log h))^l`` or
    ``"unclassified"`` when no candidate reaches the threshold (the best
    candidate is still reported in the other fields).
    """

    model: str
    alpha: float
    k: int
    l: int
    coefficient: float
    residual: float
    candidates: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"model": self.model, "alpha": self.alpha, "k": self.k, "l": self.l,
                "coefficient": self.coefficient, "residual": self.residual}


def leading_term_values(model: str, h, *, alpha: float = 0.0, k: int = 0, l: int = 0,
                        coefficient: float = 1.0) -> np.ndarray:
    """Evaluate a leading-term model at real ``0 < h < 1``; ``log log h`` means ``log(-log h)``."""
    h = np.asarray(h, dtype=float)
    L = np.log(h)
    if model == "power_log":
        return coefficient * h ** alpha * L ** k
    if model == "inverse_log":
        return coefficient * L ** (-float(k)) * np.log(-L) ** l
    raise ConfigError(f"unknown leading-term model {model!r}")


def _relative_rms(pred, data) -> float:
    return float(np.sqrt(np.mean(((pred - data) / data) ** 2)))


def fit_leading_term(h, values, *, max_k: int = 6, max_l: int = 6, threshold: float = CLASSIFY_THRESHOLD,
                     holdout: int = 4, min_decades: float = 3.0) -> LeadingTermFit:
    """Classify the behaviour of real samples ``I(h)`` as ``h -> 0``.

    Every ``holdout``-th sample is held out.  For ``C h^alpha (log h)^k``,
    ``alpha`` and ``log|C|`` come from linear regression of
    ``log|I| - k log|log h|`` on ``log h``; for
    ``C (log h)^-k (log(-log h))^l`` the coefficient is a linear least-squares
    fit.  Integers are searched exhaustively; the candidate with the
    smallest relative RMS error on the held-out samples wins (ties go to the
    simpler model).  Above ``threshold`` the result is ``"unclassified"``.
    """
    h = np.asarray(h, dtype=float)
    v = np.asarray(values, dtype=float)
    if h.shape != v.shape or h.ndim != 1:
        raise ConfigError("h and values must be 1-d arrays of equal length")
    if np.any(h <= 0) or np.any(h >= 1):
        raise ConfigError("samples must lie in (0, 1)")
    if math.log10(h.max() / h.min()) < min_decades:
        raise FitError(f"samples span fewer than {min_decades} decades", operation="fit_leading_term")
    if np.any(v == 0) or not np.all(np.isfinite(v)):
        raise FitError("samples must be finite and nonzero", operation="fit_leading_term")
    idx = np.arange(len(h))
    test = idx % holdout == holdout - 1
    train = ~test
    if train.sum() < 3 or test.sum() < 1:
        raise FitError("too few samples for a held-out fit", operation="fit_leading_term")
    L = np.log(h)
    cands = []
    for k in range(max_k + 1):
        y = np.log(np.abs(v)) - k * np.log(np.abs(L))
        X = np.column_stack([np.ones(train.sum()), L[train]])
        coef, *_ = np.linalg.lstsq(X, y[train], rcond=None)
        alpha = float(coef[1])
        base = leading_term_values("power_log", h, alpha=alpha, k=k)
        sign = np.sign(np.median(v[train] / base[train]))
        C = float(sign * math.exp(coef[0]))
        res = _relative_rms(C * base[test], v[test])
        cands.append(("power_log", alpha, k, 0, C, res))
    for k in range(max_k + 1):
        for l in range(max_l + 1):
            if k == 0 and l == 0:
                continue
            base = leading_term_values("inverse_log", h, k=k, l=l)
            b = base[train]
            C = float(b @ v[train] / (b @ b))
            res = _relative_rms(C * base[test], v[test])
            cands.append(("inverse_log", 0.0, k, l, C, res))
    ranked = sorted(enumerate(cands), key=lambda ic: (round(ic[1][5], 12), ic[0]))
    best = ranked[0][1]
    model = best[0] if best[5] <= threshold else "unclassified"
    return LeadingTermFit(model, best[1], best[2], best[3], best[4], best[5],
                          [c for _, c in ranked[:5]])


# --- compensator substitution ------------------------------------------------------------

def real_sign_changes(f: Callable, a: float, b: float, *, n: int = 256, xtol: float = 1e-13,
                      pole_guard: float = 1e-6) -> list[float]:
    """Zeros of a real function on ``[a, b]`` located by sign changes plus local refinement.

    Brackets are polished with Brent's method; a bracket whose polished
    point has ``|f|`` above ``pole_guard * max|f|`` is a pole, not a zero.
    Local minima of ``|f|`` between samples of equal sign are examined
    with a bounded minimizer so a pair of close zeros is not missed.
    """
    x = np.linspace(a, b, n)
    y = np.array([float(f(t)) for t in x])
    scale = float(np.max(np.abs(y[np.isfinite(y)]))) if np.any(np.isfinite(y)) else 1.0
    zeros = []
    for i in range(n - 1):
        if y[i] == 0:
            zeros.append(float(x[i]))
            continue
        if np.sign(y[i]) != np.sign(y[i + 1]) and y[i + 1] != 0:
            z = optimize.brentq(f, x[i], x[i + 1], xtol=xtol * max(1.0, abs(x[i])))
            if abs(f(z)) <= pole_guard * scale:
                zeros.append(float(z))
    if y[-1] == 0:
        zeros.append(float(x[-1]))
    for i in range(1, n - 1):
        s = np.sign(y[i])
        if s == 0 or np.sign(y[i - 1]) != s or np.sign(y[i + 1]) != s:
            continue
        if abs(y[i]) <= abs(y[i - 1]) and abs(y[i]) <= abs(y[i + 1]):
            r = optimize.minimize_scalar(lambda t: s * f(t), bounds=(x[i - 1], x[i + 1]), method="bounded",
                                         options={"xatol": xtol})
            if r.fun < 0:
                lo = optimize.brentq(f, x[i - 1], r.x, xtol=xtol)
                hi = optimize.brentq(f, r.x, x[i + 1], xtol=xtol)
                zeros += [float(lo), float(hi)]
    return sorted(zeros)


@dataclass
class CompositeZeros:
    count: int
    zeros_w: list[float]
    zeros_h: list[float]
    w_interval: tuple[float, float]
    increasing: bool


def composite_zeros(f: Callable, eps: float, alpha: float, interval: tuple[float, float], *,
                    n: int = 256) -> CompositeZeros:
    """Zeros in ``h`` of ``f(-1/omega(h, eps, alpha))`` counted in the variable ``w = -1/omega``.

    The substitution is checked to be strictly monotone on ``n`` samples
    of the interval (:class:`MonotonicityFailure` otherwise, which is also
    raised past the fold where ``omega`` stops being real).  The count in
    ``w`` equals the count in ``h``; zeros are mapped back with
    ``h = H~(w)``.
    """
    h0, h1 = float(interval[0]), float(interval[1])
    if not 0 < h0 < h1:
        raise ConfigError(f"need 0 < h0 < h1, got {interval}")
    hs = np.geomspace(h0, h1, n)
    ws = []
    for h in hs:
        om = omega_root(h, eps, alpha)
        if isinstance(om, complex):
            raise MonotonicityFailure(f"omega({h:.6g}) is not real (past the fold)",
                                      operation="count_zeros_of_compensator_composite")
        ws.append(-1.0 / om)
    ws = np.array(ws)
    d = np.diff(ws)
    if not (np.all(d > 0) or np.all(d < 0)):
        raise MonotonicityFailure("w = -1/omega is not strictly monotone on the interval",
                                  operation="count_zeros_of_compensator_composite")
    wa, wb = (ws[0], ws[-1]) if d[0] > 0 else (ws[-1], ws[0])
    zw = real_sign_changes(lambda w: float(np.real(f(w))), wa, wb, n=n)
    zh = [float(np.real(h_tilde(w, eps, alpha))) for w in zw]
    return CompositeZeros(len(zw), zw, zh, (float(wa), float(wb)), bool(d[0] > 0))


def count_zeros_of_compensator_composite(f: Callable, eps: float, alpha: float,
                                         interval: tuple[float, float], **kw) -> int:
    return composite_zeros(f, eps, alpha, interval, **kw).count


# --- uniformity experiment ----------------------------------------------------------------

@dataclass
class UniformityTable:
    rows: list  # (eps, alpha, zero_count, zero_count_refined, b, min_reachable_h)
    n_h: int
    refine: int

    @property
    def max_count(self) -> int:
        return max(r[2] for r in self.rows)

    @property
    def max_count_refined(self) -> int:
        return max(r[3] for r in self.rows)

    @property
    def stable(self) -> bool:
        return self.max_count == self.max_count_refined

    def to_csv(self, path) -> None:
        lines = ["eps,alpha,zero_count,b,min_reachable_h,zero_count_refined"]
        for e, a, c, cr, b, hm in self.rows:
            lines.append(f"{e:.17g},{a:.17g},{c},{b:.17g},{hm:.17g},{cr}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _cell(args):
    sys, eta, eps, alpha, n_h, refine, h_min_frac, tolerances = args
    params = UnfoldingParams(eps, alpha)
    nest = interior_extremum(sys, params)
    h_min = h_min_frac * nest.b
    coarse = sweep(sys, params, eta, h_grid(nest.b, n_h, h_min=h_min), tolerances=tolerances, nest=nest)
    fine = sweep(sys, params, eta, h_grid(nest.b, refine * (n_h - 1) + 1, h_min=h_min),
                 tolerances=tolerances, nest=nest)
    return (float(eps), float(alpha), coarse.zero_count, fine.zero_count, float(nest.b),
            float(coarse.min_reachable_h))


def uniformity_experiment(sys: DarbouxSystem, eta: OneForm, eps_grid: Sequence[float],
                          alpha_grid: Sequence[float], *, n_h: int = 40, refine: int = 2,
                          h_min_frac: float = 1e-6, tolerances: TraceTolerances | None = None,
                          jobs: int = 1) -> UniformityTable:
    """Zero counts of ``I`` on ``(0, b)`` over an ``(eps, alpha)`` grid at two h-resolutions.

    The refined grid has ``refine * (n_h - 1) + 1`` points and contains
    the coarse one.  Cells are independent; rows come back in grid order
    (``eps`` outer, ``alpha`` inner) whatever ``jobs`` is.
    """
    if not len(eps_grid) or not len(alpha_grid):
        raise ConfigError("parameter grids must be nonempty")
    if n_h < 3 or refine < 1:
        raise ConfigError("need n_h >= 3 and refine >= 1")
    args = [(sys, eta, float(e), float(a), n_h, refine, h_min_frac, tolerances)
            for e in eps_grid for a in alpha_grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_cell, args))
    else:
        rows = [_cell(a) for a in args]
    return UniformityTable(rows, n_h, refine)


# --- variation fit in w -------------------------------------------------------------------

def _laurent_matrix(w, pole_order: int, degree: int, scale: float):
    s = np.asarray(w) / scale
    return np.column_stack([s ** j for j in range(-pole_order, degree + 1)])


def fit_laurent(w, values, degree: int, *, pole_order: int = 0, scale: float | None = None):
    """Least-squares ``sum_{j=-pole_order}^{degree} c_j (w/scale)^j``; returns ``(coeffs, scale, rel_residual)``.

    Coefficients refer to the scaled variable ``w/scale`` (``scale`` defaults
    to ``max|w|``), which keeps the fit well conditioned.  The residual is
    ``||V - fit|| / ||V||`` over the fitted samples.
    """
    w = np.asarray(w, dtype=float)
    v = np.asarray(values, dtype=complex)
    scale = float(scale if scale is not None else np.max(np.abs(w)))
    A = _laurent_matrix(w, pole_order, degree, scale)
    if A.shape[1] > len(w):
        raise FitError(f"{A.shape[1]} coefficients from {len(w)} samples", operation="variation_fit")
    coef, *_ = np.linalg.lstsq(A.astype(complex), v, rcond=None)
    nv = float(np.linalg.norm(v))
    res = float(np.linalg.norm(A @ coef - v)) / nv if nv > 0 else 0.0
    return coef, scale, res


@dataclass
class VariationFit:
    h: np.ndarray
    w: np.ndarray
    values: np.ndarray
    pole_order: int
    degrees: list[int]
    residuals: list[float]
    monotone: bool
    degree: int | None
    coefficients: np.ndarray | None
    split_difference: float
    split_agrees: bool
    tolerance: float
    degenerate: bool = False

    def as_dict(self) -> dict:
        return {
            "pole_order": self.pole_order, "degrees": self.degrees, "residuals": self.residuals,
            "monotone": self.monotone, "degree": self.degree, "split_difference": self.split_difference,
            "split_agrees": self.split_agrees, "tolerance": self.tolerance, "degenerate": self.degenerate,
        }


def analyze_variation(h, w, values, *, degrees: Sequence[int] = tuple(range(9)), pole_order: int = 1,
                      tolerance: float = 1e-2, floor: float = 1e-12) -> VariationFit:
    """Nested Laurent fits of ``V`` in ``w`` and a split-sample comparison.

    ``monotone`` holds when each residual is at most the previous one
    (residuals below ``floor`` count as converged).  The fit degree is the
    smallest one meeting ``tolerance``; at that degree the even- and
    odd-indexed samples are fitted separately and compared, relative to
    ``max|V|``, as functions on the samples inside the range both halves
    cover.  Monomial coefficients of ``1/w, 1, w, ...`` are nearly
    collinear and extrapolation past either half is ill conditioned, so
    neither is a fair measure of agreement.
    """
    h = np.asarray(h, dtype=float)
    w = np.asarray(w, dtype=float)
    v = np.asarray(values, dtype=complex)
    vmax = float(np.max(np.abs(v))) if len(v) else 0.0
    if vmax == 0.0:
        return VariationFit(h, w, v, pole_order, list(degrees), [0.0] * len(degrees), True, min(degrees),
                            np.zeros(pole_order + min(degrees) + 1, dtype=complex), 0.0, True, tolerance,
                            degenerate=True)
    scale = float(np.max(np.abs(w)))
    residuals = [fit_laurent(w, v, d, pole_order=pole_order, scale=scale)[2] for d in degrees]
    monotone = all(b <= a * (1 + 1e-9) or b <= floor for a, b in zip(residuals[:-1], residuals[1:]))
    ok = [d for d, r in zip(degrees, residuals) if r < tolerance]
    if not ok:
        return VariationFit(h, w, v, pole_order, list(degrees), residuals, monotone, None, None,
                            math.inf, False, tolerance)
    d = ok[0]
    coef, _, _ = fit_laurent(w, v, d, pole_order=pole_order, scale=scale)
    even = np.arange(len(w)) % 2 == 0
    ce, _, _ = fit_laurent(w[even], v[even], d, pole_order=pole_order, scale=scale)
    co, _, _ = fit_laurent(w[~even], v[~even], d, pole_order=pole_order, scale=scale)
    inside = ((w >= max(w[even].min(), w[~even].min())) & (w <= min(w[even].max(), w[~even].max())))
    gap = _laurent_matrix(w[inside], pole_order, d, scale) @ (ce - co)
    diff = float(np.max(np.abs(gap))) / vmax
    return VariationFit(h, w, v, pole_order, list(degrees), residuals, monotone, d, coef, diff,
                        diff <= tolerance, tolerance)


def variation_fit(sys: DarbouxSystem, params: UnfoldingParams, eta: OneForm, spec: VarSpec, hs, *,
                  degrees: Sequence[int] = tuple(range(9)), pole_order: int = 1, tolerance: float = 1e-2,
                  kappa: float = 0.05, jobs: int = 1, values=None) -> VariationFit:
    """``V = Var_{a_1..a_k} I`` on ``hs`` fitted as a Laurent series in ``w = -1/omega(h, eps, alpha)``.

    ``values`` may be passed to reuse previously computed variations.
    """
    hs = np.asarray(hs, dtype=float)
    if values is None:
        values = iterated_var_samples(sys, params, eta, hs, spec, kappa=kappa, jobs=jobs)
    w = []
    for h in hs:
        om = omega_root(h, params.eps, params.alpha)
        if isinstance(om, complex):
            raise MonotonicityFailure(f"omega({h:.6g}) is not real; w is not a coordinate there",
                                      operation="variation_fit")
        w.append(-1.0 / om)
    return analyze_variation(hs, np.array(w), values, degrees=degrees, pole_order=pole_order,
                             tolerance=tolerance)
