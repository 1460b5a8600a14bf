"""Continuation of cycles along paths in the h-plane and the variation operators."""

from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .cycles import Cycle, FoliationState, project_to_level, segment_graph
from .darboux import DarbouxSystem, OneForm, UnfoldingParams
from .errors import ConfigError, CriticalPointHit, MarkersLeftDomain, ProjectionDivergence
from .foliation import Foliation, darboux_foliation
from .integrator import integrate_form_detailed
from .tracer import NestInfo, TraceTolerances, interior_extremum, trace_oval

__all__ = [
    "HPath",
    "TransportControls",
    "TransportResult",
    "VarSpec",
    "lift_tangent",
    "transport",
    "continue_cycle",
    "rotate_level",
    "var_integral",
    "var_integral_detailed",
    "iterated_var",
    "iterated_var_detailed",
    "iterated_var_samples",
    "var_scalar",
]


# --- paths ---------------------------------------------------------------------

@dataclass(frozen=True)
class HPath:
    """Path ``rho(t) = exp(ell(t))``, ``t`` in ``[0, 1]``, given in the log chart.

    Working with ``ell = log rho`` keeps the winding around 0 explicit, so a
    rotation by ``2 pi`` is a different path from the constant one.
    ``breaks`` lists parameters where ``ell'`` may jump.
    """

    ell: Callable[[float], complex]
    dell: Callable[[float], complex]
    breaks: tuple[float, ...] = ()
    label: str = ""

    def rho(self, t: float) -> complex:
        return complex(np.exp(self.ell(t)))

    def drho(self, t: float) -> complex:
        return self.rho(t) * self.dell(t)

    @property
    def start(self) -> complex:
        return complex(self.ell(0.0))

    @property
    def end(self) -> complex:
        return complex(self.ell(1.0))

    def samples(self, n: int = 201):
        """``(t, rho, rho')`` on a uniform grid."""
        t = np.linspace(0.0, 1.0, n)
        rho = np.array([self.rho(s) for s in t])
        drho = np.array([self.drho(s) for s in t])
        return t, rho, drho

    def is_constant(self) -> bool:
        t = np.linspace(0, 1, 33)
        return all(self.dell(s) == 0 for s in t)

    def modulus_decreasing(self, n: int = 401) -> bool:
        """``|rho|'(t) < 0`` on a sample grid (equivalently ``Re ell' < 0``)."""
        t = np.linspace(0, 1, n)
        return bool(all(self.dell(s).real < 0 for s in t))

    def reversed(self) -> "HPath":
        ell, dell = self.ell, self.dell
        return HPath(lambda t: ell(1.0 - t), lambda t: -dell(1.0 - t),
                     tuple(sorted(1.0 - b for b in self.breaks)), self.label + "^-1")

    @classmethod
    def constant(cls, h) -> "HPath":
        l0 = complex(np.log(complex(h)))
        return cls(lambda t: l0, lambda t: 0j, (), "const")

    @classmethod
    def log_linear(cls, l0, l1) -> "HPath":
        l0, l1 = complex(l0), complex(l1)
        d = l1 - l0
        return cls(lambda t: l0 + t * d, lambda t: d, (), "log-linear")

    @classmethod
    def log_polynomial(cls, l0, coeffs: Sequence[complex]) -> "HPath":
        """``ell(t) = l0 + sum_k c_k t**(k+1)``."""
        l0 = complex(l0)
        c = np.array(coeffs, dtype=complex)
        powers = np.arange(1, len(c) + 1)

        def ell(t):
            return l0 + complex(np.sum(c * t ** powers))

        def dell(t):
            return complex(np.sum(c * powers * t ** (powers - 1)))

        return cls(ell, dell, (), "log-poly")

    @classmethod
    def rotation(cls, h, beta: float, shrink: float = 0.0) -> "HPath":
        """``rho(t) = h (1 - shrink t) exp(i beta t)``."""
        if not 0 <= shrink < 1:
            raise ConfigError(f"shrink must lie in [0, 1), got {shrink}")
        lh = complex(np.log(complex(h)))
        return cls(
            lambda t: lh + math.log1p(-shrink * t) + 1j * beta * t,
            lambda t: -shrink / (1.0 - shrink * t) + 1j * beta,
            (), f"rot({beta:.6g},{shrink:.3g})",
        )

    @classmethod
    def segment(cls, h0, h1) -> "HPath":
        """Straight segment from ``h0`` to ``h1`` (must avoid 0)."""
        h0, h1 = complex(h0), complex(h1)
        z = (h1 - h0) / h0
        if z.imag == 0 and z.real <= -1:
            raise ConfigError("segment passes through 0")
        l0 = complex(np.log(h0))
        return cls(lambda t: l0 + complex(np.log(1 + t * z)), lambda t: z / (1 + t * z), (), "segment")

    @classmethod
    def concat(cls, paths: Sequence["HPath"]) -> "HPath":
        """Paths run one after another on equal parameter subintervals; ``ell`` is made continuous."""
        paths = list(paths)
        k = len(paths)
        offsets = [0j]
        for a, b in zip(paths[:-1], paths[1:]):
            offsets.append(offsets[-1] + a.end - b.start)

        def locate(t):
            j = min(int(t * k), k - 1)
            return j, t * k - j

        def ell(t):
            j, s = locate(t)
            return paths[j].ell(s) + offsets[j]

        def dell(t):
            j, s = locate(t)
            return k * paths[j].dell(s)

        breaks = [j / k for j in range(1, k)]
        for j, p in enumerate(paths):
            breaks += [(j + b) / k for b in p.breaks]
        return cls(ell, dell, tuple(sorted(breaks)), "+".join(p.label for p in paths))


# --- lift --------------------------------------------------------------------------

def lift_tangent(sys, params, p, xi, *, h_value=None, threshold: float = 1e-9) -> np.ndarray:
    """Minimal-norm ``v`` with ``dH(p)(v) = xi``: ``v = conj(grad H) xi / |grad H|**2``.

    ``sys`` may be a :class:`DarbouxSystem` or any :class:`Foliation`
    (``params`` is then ignored).  ``h_value`` selects the branch of ``H``
    at ``p``; by default the principal one.
    """
    fol = sys if isinstance(sys, Foliation) else darboux_foliation(sys, params)
    P = np.asarray(p, dtype=complex).reshape(1, 2)
    st = fol.evaluate(P)
    if h_value is None:
        h_value = np.exp(fol.log_h(fol.principal_logs(st))[0])
    grad = complex(h_value) * st.theta[0]
    nrm2 = float(np.sum(np.abs(grad) ** 2))
    if not nrm2 > threshold ** 2:
        raise CriticalPointHit(f"|grad H| = {math.sqrt(nrm2):.3g} below {threshold} at {p}",
                               operation="lift_tangent")
    return np.conj(grad) * complex(xi) / nrm2


# --- continuation ------------------------------------------------------------------

@dataclass(frozen=True)
class TransportControls:
    step_tol: float = 1e-10  # level mismatch of the predictor per step
    newton_tol: float = 1e-13
    max_spacing: float = 0.02
    max_dev: float = 0.1
    min_markers: int = 64
    max_markers: int = 8192
    spacing_ratio: float = 10.0
    dt_init: float = 1e-3
    dt_min: float = 1e-10
    dt_max: float = 0.05
    max_steps: int = 200000
    critical_threshold: float = 1e-9  # on |theta| * length_scale
    length_scale: float = 1.0
    domain_radius: float = 1e6


@dataclass
class TransportResult:
    cycle: Cycle
    snapshots: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)
    steps: int = 0
    rejected: int = 0
    max_markers: int = 0


def _with_logs(fol: Foliation, cyc: Cycle) -> Cycle:
    if cyc.logs is not None:
        return cyc
    return replace(cyc, logs=fol.principal_logs(fol.evaluate(cyc.points)))


REFINE_AHEAD = 0.5


def _rk4(fol, P, st, path: HPath, t: float, h: float, stop: float):
    """One RK4 step of ``dp/dt = L(p) ell'(t)``; derivatives stay inside the smooth piece."""
    d0 = path.dell(min(t + 1e-14, stop))
    dm = path.dell(t + 0.5 * h)
    d1 = path.dell(max(t + h - 1e-14, t))
    k1 = fol.lift(P, st) * d0
    P2 = P + 0.5 * h * k1
    k2 = fol.lift(P2, fol.evaluate(P2)) * dm
    P3 = P + 0.5 * h * k2
    k3 = fol.lift(P3, fol.evaluate(P3)) * dm
    P4 = P + h * k3
    k4 = fol.lift(P4, fol.evaluate(P4)) * d1
    return P + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


class _Markers:
    """Markers with their origin on the initial cycle.

    ``origin`` is a real parameter along the initial cycle (integer part:
    segment, fractional part: chord parameter).  A marker inserted later is
    created at its origin and carried through the recorded step history, so
    the transported curve is the flow image of the initial curve no matter
    how markers are added or removed.  (On a complex leaf the arc between
    two markers is not determined by its endpoints, so chord-based
    insertion alone would change the represented curve within its homotopy
    class.)
    """

    def __init__(self, fol: Foliation, cyc: Cycle, path: HPath, controls: TransportControls):
        self.fol = fol
        self.c = controls
        self.path = path
        self.init = cyc
        self.init_state = fol.evaluate(cyc.points)
        self.n0 = cyc.n
        self.closed = cyc.closed
        self.cyc = cyc.copy()
        self.st = self.init_state.take(np.arange(cyc.n))
        self.origin = np.arange(cyc.n, dtype=float)
        self.history: list[tuple[float, float, float, complex]] = []

    # origin bookkeeping
    def _mid_origins(self, i, j):
        oi, oj = self.origin[i], self.origin[j]
        if self.closed:
            oj = np.where(oj <= oi, oj + self.n0, oj)
        mid = 0.5 * (oi + oj)
        if self.closed:
            mid = np.mod(mid, self.n0)
        return mid, np.abs(oj - oi)

    def _initial_points(self, origins):
        seg = np.floor(origins).astype(int)
        frac = origins - seg
        if self.closed:
            seg = seg % self.n0
            nxt = (seg + 1) % self.n0
        else:
            seg = np.minimum(seg, self.n0 - 2)
            frac = origins - seg
            nxt = seg + 1
        ini = self.init
        X, _, logs, ok = segment_graph(
            self.fol, ini.points[seg], ini.logs[seg], self.init_state.take(seg),
            ini.points[nxt], self.init_state.theta[nxt], ini.log_level, frac[:, None],
        )
        return X[:, 0, :], logs[:, 0, :], ok

    def _replay(self, P, logs):
        fol = self.fol
        st = fol.evaluate(P)
        ok = np.ones(len(P), dtype=bool)
        for t, h, stop, target in self.history:
            Pp = _rk4(fol, P, st, self.path, t, h, stop)
            proj = project_to_level(fol, Pp, logs, st, target, tol=self.c.newton_tol)
            ok &= proj.converged & proj.branch_ok
            P, logs, st = proj.points, proj.logs, proj.state
        return P, logs, st, ok

    def refine(self):
        """Insert flow images of origin midpoints where the polygon under-resolves the leaf."""
        fol, c = self.fol, self.c
        for _ in range(8):
            cyc = self.cyc
            i, j = cyc.segments()
            chord = np.linalg.norm(cyc.points[j] - cyc.points[i], axis=1)
            X, _, _, okm = segment_graph(fol, cyc.points[i], cyc.logs[i], self.st.take(i),
                                         cyc.points[j], self.st.theta[j], cyc.log_level,
                                         np.array([0.5]))
            mid = 0.5 * (cyc.points[i] + cyc.points[j])
            dev = np.linalg.norm(X[:, 0, :] - mid, axis=1) / np.where(chord > 0, chord, 1.0)
            need = (chord > c.max_spacing) | (dev > c.max_dev) | ~okm
            if np.any(need):
                # every insertion replays the step history, so refine ahead of the thresholds
                need |= (chord > REFINE_AHEAD * c.max_spacing) | (dev > REFINE_AHEAD * c.max_dev)
            omid, gap = self._mid_origins(i, j)
            need &= gap > 1e-9
            room = c.max_markers - cyc.n
            sel = np.flatnonzero(need)[:max(room, 0)]
            if len(sel) == 0:
                return
            P0, logs0, ok0 = self._initial_points(omid[sel])
            P1, logs1, st1, ok1 = self._replay(P0, logs0)
            good = ok0 & ok1
            if not np.any(good):
                return
            sel, P1, logs1, st1 = sel[good], P1[good], logs1[good], st1.take(np.flatnonzero(good))
            self._insert(i[sel], P1, logs1, st1, omid[sel])

    def _insert(self, after, P, logs, st, origins):
        cyc = self.cyc
        n = cyc.n
        order = np.argsort(np.concatenate([np.arange(n, dtype=float), after + 0.5]), kind="stable")
        tags = None
        if cyc.chart_tags is not None:
            tags = list(cyc.chart_tags) + [cyc.chart_tags[k] for k in after]
            tags = [tags[k] for k in order]
        self.cyc = replace(cyc, points=np.concatenate([cyc.points, P])[order],
                           logs=np.concatenate([cyc.logs, logs])[order], chart_tags=tags)
        self.st = FoliationState.concat([self.st, st]).take(order)
        self.origin = np.concatenate([self.origin, origins])[order]

    def thin(self):
        """Drop every other marker where its neighbours' chord already resolves the leaf."""
        c, cyc = self.c, self.cyc
        n = cyc.n
        if n <= c.min_markers:
            return
        sp = cyc.spacing()
        if sp.max() <= c.spacing_ratio * max(sp.min(), 1e-300):
            return
        last = n - 1 if (not cyc.closed or n % 2 == 1) else n
        cand = np.arange(1, last, 2)
        a = cyc.points[cand - 1]
        b = cyc.points[(cand + 1) % n]
        p = cyc.points[cand]
        d = b - a
        dd = np.sum(np.abs(d) ** 2, axis=1)
        tpar = np.real(np.sum(np.conj(d) * (p - a), axis=1)) / np.where(dd > 0, dd, 1.0)
        dist = np.linalg.norm(p - a - np.clip(tpar, 0, 1)[:, None] * d, axis=1)
        chord = np.sqrt(dd)
        drop = cand[(dist < 0.02 * c.max_dev * chord) & (chord < 0.5 * c.max_spacing)
                    & (chord < 0.5 * sp.max())]
        drop = drop[: n - c.min_markers]
        if len(drop) == 0:
            return
        keep = np.ones(n, dtype=bool)
        keep[drop] = False
        tags = None if cyc.chart_tags is None else [t for t, k in zip(cyc.chart_tags, keep) if k]
        self.cyc = replace(cyc, points=cyc.points[keep], logs=cyc.logs[keep], chart_tags=tags)
        self.st = self.st.take(keep)
        self.origin = self.origin[keep]

    def ensure_min(self):
        while self.cyc.n < self.c.min_markers:
            before = self.cyc.n
            sp = float(np.max(self.cyc.spacing()))
            saved = self.c
            self.c = replace(saved, max_spacing=0.5 * sp, max_markers=saved.min_markers)
            self.refine()
            self.c = saved
            if self.cyc.n == before:
                break


def transport(
    fol: Foliation,
    cycle: Cycle,
    path: HPath,
    controls: TransportControls | None = None,
    *,
    snapshots: Sequence[float] = (),
    record_trace: bool = False,
    monitor: Callable | None = None,
    manage_markers: bool = True,
) -> TransportResult:
    """Move every marker along its lift of ``path`` (RK4 predictor, Newton corrector).

    The cycle must lie on ``{log H = path.ell(0)}`` (checked).  With
    ``manage_markers`` the polygon is refined where it under-resolves the
    leaf and thinned where it over-resolves it; new markers are flow images
    of points of the initial cycle.  ``monitor(t, points_before,
    points_after)`` is called after every accepted step, before marker
    management, with the markers that existed before the step.
    """
    c = controls or TransportControls()
    cyc = _with_logs(fol, cycle).copy()
    l0 = path.ell(0.0)
    lvl = fol.log_h(cyc.logs)
    if np.max(np.abs(lvl - l0)) > 1e-8 * max(1.0, abs(l0)):
        raise ConfigError(f"cycle is not on the path's starting level: mismatch {np.max(np.abs(lvl - l0)):.3g}")
    cyc.log_level = l0
    res = TransportResult(cyc)
    snaps = sorted(set(float(s) for s in snapshots))
    if path.is_constant():
        res.cycle = cyc
        for s in snaps:
            res.snapshots[s] = cyc.copy()
        return res
    mk = _Markers(fol, cyc, path, c)
    if manage_markers:
        mk.ensure_min()
        mk.refine()
    if 0.0 in snaps:
        res.snapshots[0.0] = mk.cyc.copy()
    stops = sorted(set([1.0] + [b for b in path.breaks if 0 < b < 1] + [s for s in snaps if 0 < s < 1]))
    t = 0.0
    dt = c.dt_init
    steps = rejected = 0
    for stop in stops:
        while t < stop - 1e-15:
            if steps + rejected > c.max_steps:
                raise ProjectionDivergence(f"continuation exceeded {c.max_steps} steps at t={t}",
                                           operation="continue_cycle")
            h = min(dt, stop - t, c.dt_max)
            if stop - (t + h) < 1e-12:
                h = stop - t
            t1 = t + h if stop - (t + h) >= 1e-12 else stop
            cyc, st = mk.cyc, mk.st
            Pp = _rk4(fol, cyc.points, st, path, t, h, stop)
            target = path.ell(t1)
            if not np.all(np.isfinite(Pp)):
                err, ok = np.inf, False
            else:
                stp = fol.evaluate(Pp)
                inc, okb = fol.increments(st, stp)
                err = float(np.max(np.abs(fol.log_h(cyc.logs + inc) - target)))
                ok = bool(np.all(okb)) and np.isfinite(err) and err <= c.step_tol
            if not ok:
                rejected += 1
                fac = 0.5 if not np.isfinite(err) else min(0.5, 0.9 * (c.step_tol / err) ** 0.2)
                dt = h * max(fac, 0.1)
                if dt < c.dt_min:
                    names = fol.nearest_factor(st)
                    raise ProjectionDivergence(
                        f"step size collapsed at t={t:.6g} (nearest invariant curve: {names[0]})",
                        operation="continue_cycle", data={"t": t})
                continue
            proj = project_to_level(fol, Pp, cyc.logs, st, target, tol=c.newton_tol)
            if not (np.all(proj.converged) and np.all(proj.branch_ok)):
                rejected += 1
                dt = h * 0.5
                if dt < c.dt_min:
                    raise ProjectionDivergence(f"Newton projection failed at t={t:.6g}",
                                               operation="continue_cycle", data={"t": t})
                continue
            tn = fol.theta_norm(proj.state) * c.length_scale
            if np.any(tn < c.critical_threshold):
                k = int(np.argmin(tn))
                raise CriticalPointHit(
                    f"marker {k} reached a critical point of H near {fol.nearest_factor(proj.state.take([k]))[0]}",
                    operation="continue_cycle", data={"t": t1, "point": proj.points[k].tolist()})
            if np.any(np.abs(proj.points) > c.domain_radius):
                raise MarkersLeftDomain(f"markers left |z| < {c.domain_radius} at t={t1:.6g}",
                                        operation="continue_cycle", data={"t": t1})
            mk.history.append((t, h, stop, target))
            old = cyc.points
            mk.cyc = replace(cyc, points=proj.points, logs=proj.logs, log_level=target)
            mk.st = proj.state
            steps += 1
            t = t1
            if monitor is not None:
                monitor(t, old, mk.cyc.points)
            if manage_markers:
                mk.refine()
                mk.thin()
            res.max_markers = max(res.max_markers, mk.cyc.n)
            if record_trace:
                lv = fol.log_h(mk.cyc.logs)
                res.trace.append((t, complex(np.exp(target)), float(np.max(np.abs(np.expm1(lv - target))))))
            fac = 2.0 if err == 0 else min(2.0, max(0.3, 0.9 * (c.step_tol / err) ** 0.2))
            dt = h * fac
        if stop in snaps:
            res.snapshots[stop] = mk.cyc.copy()
    out = mk.cyc
    out.log_level = path.ell(1.0)
    out.meta = dict(out.meta, origin=mk.origin.copy())
    res.cycle = out
    res.steps, res.rejected = steps, rejected
    return res


def _controls_for(sys: DarbouxSystem, controls: TransportControls | None) -> TransportControls:
    if controls is not None:
        return controls
    xmin, xmax, ymin, ymax = sys.region
    diam = math.hypot(xmax - xmin, ymax - ymin)
    return TransportControls(max_spacing=0.02 * diam, length_scale=diam)


def continue_cycle(sys: DarbouxSystem, params: UnfoldingParams, cycle: Cycle, path: HPath,
                   controls: TransportControls | None = None, **kw) -> Cycle:
    """Cycle on ``{H = rho(1)}`` obtained by transporting ``cycle`` along ``rho``."""
    fol = darboux_foliation(sys, params)
    return transport(fol, cycle, path, _controls_for(sys, controls), **kw).cycle


def rotate_level(sys: DarbouxSystem, params: UnfoldingParams, cycle: Cycle, h, beta: float,
                 shrink: float = 0.0, controls: TransportControls | None = None) -> Cycle:
    """Continuation along ``rho(t) = h (1 - shrink t) exp(i beta t)``.

    ``h`` fixes the branch of ``log h`` only through the cycle's own level,
    so it must match ``exp(cycle.log_level)``.
    """
    if abs(complex(h) - cycle.level) > 1e-9 * abs(cycle.level):
        raise ConfigError(f"h={h} does not match the cycle level {cycle.level}")
    l0 = cycle.log_level
    path = HPath(lambda t: l0 + math.log1p(-shrink * t) + 1j * beta * t,
                 lambda t: -shrink / (1 - shrink * t) + 1j * beta, (), "rot")
    if sys is None or isinstance(sys, Foliation):
        fol = sys
        return transport(fol, cycle, path, controls or TransportControls()).cycle
    return continue_cycle(sys, params, cycle, path, controls)


# --- variations ----------------------------------------------------------------------

@dataclass(frozen=True)
class VarSpec:
    residues: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "residues", tuple(float(a) for a in self.residues))
        if len(self.residues) < 1:
            raise ConfigError("at least one residue is required")
        if any(not a > 0 for a in self.residues):
            raise ConfigError(f"residues must be positive: {self.residues}")

    @property
    def k(self) -> int:
        return len(self.residues)


def var_scalar(g: Callable[[complex], complex], u, a: float):
    """``Var_a`` of a function given in the log chart: ``g(u + i a pi) - g(u - i a pi)``."""
    return g(u + 1j * a * math.pi) - g(u - 1j * a * math.pi)


def _shrink_factor(a: float, kappa: float) -> float:
    f = kappa * abs(a)
    if not 0 <= f < 1:
        raise ConfigError(f"shrink {kappa} per half-turn too large for residue {a}")
    return f


def _signed_path(l_start: complex, signed: Sequence[float], kappa: float) -> HPath:
    """Concatenated rotations by ``s_j a_j pi``, each shrinking |h| by ``1 - kappa a_j``."""
    pieces = []
    lc = l_start
    for sa in signed:
        f = _shrink_factor(sa, kappa)
        pieces.append(HPath.rotation(np.exp(lc), sa * math.pi, f))
        pieces[-1] = _shift(pieces[-1], lc)
        lc = pieces[-1].end
    return HPath.concat(pieces)


def _shift(path: HPath, l0: complex) -> HPath:
    off = l0 - path.start
    ell, dell = path.ell, path.dell
    return HPath(lambda t: ell(t) + off, dell, path.breaks, path.label)


@dataclass
class VarResult:
    value: complex
    terms: list  # (signs, coefficient, integral, quadrature error)
    h_start: float
    kappa: float
    details: dict = field(default_factory=dict)


def _term_worker(args):
    sys, params, eta, cyc, signed, kappa, controls, rtol = args
    path = _signed_path(cyc.log_level, signed, kappa)
    out = continue_cycle(sys, params, cyc, path, controls)
    q = integrate_form_detailed(out, sys, params, eta, rtol=rtol)
    return q.value, q.error, out.n


def iterated_var_detailed(
    sys: DarbouxSystem,
    params: UnfoldingParams,
    eta: OneForm,
    h: float,
    spec: VarSpec,
    *,
    kappa: float = 0.05,
    controls: TransportControls | None = None,
    tolerances: TraceTolerances | None = None,
    nest: NestInfo | None = None,
    rtol: float = 1e-12,
    jobs: int = 1,
    start_cycle: Cycle | None = None,
) -> VarResult:
    """``Var_{a_1} o ... o Var_{a_k} I`` at real ``h``, expanded into ``2**k`` continuations.

    The term with signs ``s`` is ``prod(s) * I`` continued along the
    concatenation of the arcs ``s_1 a_1 pi``, then ``s_2 a_2 pi``, and so on,
    each arc shrinking ``|h|`` by the factor ``1 - kappa a_j`` so that the
    modulus decreases along the whole path.  The starting real oval sits at
    ``h / prod(1 - kappa a_j)``.
    """
    if spec.k > 4:
        warnings.warn(f"iterated variation of depth {spec.k} needs {2 ** spec.k} continuations",
                      RuntimeWarning, stacklevel=2)
    nest = nest or interior_extremum(sys, params)
    factor = 1.0
    for a in spec.residues:
        factor *= 1.0 - _shrink_factor(a, kappa)
    h0 = h / factor
    if not 0 < h0 < nest.b:
        raise ConfigError(f"starting level {h0} (h={h}, shrink {kappa}) is outside the nest (0, {nest.b})")
    cyc = start_cycle if start_cycle is not None else trace_oval(sys, params, h0, tolerances, nest=nest)
    ctrl = _controls_for(sys, controls)
    sign_vectors = list(itertools.product((1, -1), repeat=spec.k))
    args = [(sys, params, eta, cyc, [s * a for s, a in zip(sv, spec.residues)], kappa, ctrl, rtol)
            for sv in sign_vectors]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_term_worker, args))
    else:
        results = [_term_worker(a) for a in args]
    total = 0j
    terms = []
    for sv, (val, err, nm) in zip(sign_vectors, results):
        coef = int(np.prod(sv))
        total += coef * val
        terms.append((tuple(sv), coef, val, err, nm))
    return VarResult(complex(total), terms, h0, kappa)


def iterated_var(sys, params, eta, h, spec: VarSpec, **kw) -> complex:
    return iterated_var_detailed(sys, params, eta, h, spec, **kw).value


def var_integral_detailed(sys, params, eta, h, a: float, **kw) -> VarResult:
    return iterated_var_detailed(sys, params, eta, h, VarSpec((a,)), **kw)


def var_integral(sys: DarbouxSystem, params: UnfoldingParams, eta: OneForm, h: float, a: float,
                 **kw) -> complex:
    """``Var_a I(h) = I(h e^{i a pi}) - I(h e^{-i a pi})`` by two continuations of the real oval."""
    return var_integral_detailed(sys, params, eta, h, a, **kw).value


def _series_worker(args):
    sys, params, eta, cyc, signed, kappa, controls, rtol, hs = args
    fol = darboux_foliation(sys, params)
    out = transport(fol, cyc, _signed_path(cyc.log_level, signed, kappa), controls).cycle
    le = out.log_level
    lo, hi = math.log(min(hs)), le.real
    values = np.empty(len(hs), dtype=complex)
    if hi - lo <= 0:
        values[:] = integrate_form_detailed(out, sys, params, eta, rtol=rtol, foliation=fol).value
        return values
    snaps = [min(max((hi - math.log(h)) / (hi - lo), 0.0), 1.0) for h in hs]
    snaps[0], snaps[-1] = 0.0, 1.0
    radial = HPath.log_linear(le, complex(lo, le.imag))
    res = transport(fol, out, radial, controls, snapshots=snaps)
    for i, s in enumerate(snaps):
        values[i] = integrate_form_detailed(res.snapshots[s], sys, params, eta, rtol=rtol, foliation=fol).value
    return values


def iterated_var_samples(
    sys: DarbouxSystem,
    params: UnfoldingParams,
    eta: OneForm,
    hs,
    spec: VarSpec,
    *,
    kappa: float = 0.05,
    controls: TransportControls | None = None,
    tolerances: TraceTolerances | None = None,
    nest: NestInfo | None = None,
    rtol: float = 1e-12,
    jobs: int = 1,
) -> np.ndarray:
    """``Var_{a_1} o ... o Var_{a_k} I`` on a whole grid of real levels.

    Each of the ``2**k`` signed continuations is carried out once, from the
    oval at ``max(hs) / prod(1 - kappa a_j)``; the resulting cycle is then
    moved radially (``arg h`` fixed) down to ``min(hs)`` and integrated at
    every sample on the way.  Values agree with :func:`iterated_var` at each
    ``h`` because the radial leg commutes with the signed arcs up to homotopy.
    """
    hs = np.asarray(hs, dtype=float)
    if hs.ndim != 1 or len(hs) == 0 or np.any(hs <= 0):
        raise ConfigError("h samples must be a nonempty list of positive levels")
    order = np.argsort(-hs, kind="stable")
    h_sorted = hs[order]
    nest = nest or interior_extremum(sys, params)
    factor = 1.0
    for a in spec.residues:
        factor *= 1.0 - _shrink_factor(a, kappa)
    h0 = h_sorted[0] / factor
    if not 0 < h0 < nest.b:
        raise ConfigError(f"starting level {h0} (shrink {kappa}) is outside the nest (0, {nest.b})")
    cyc = trace_oval(sys, params, h0, tolerances, nest=nest)
    ctrl = _controls_for(sys, controls)
    sign_vectors = list(itertools.product((1, -1), repeat=spec.k))
    args = [(sys, params, eta, cyc, [s * a for s, a in zip(sv, spec.residues)], kappa, ctrl, rtol, h_sorted)
            for sv in sign_vectors]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_series_worker, args))
    else:
        results = [_series_worker(a) for a in args]
    total = np.zeros(len(hs), dtype=complex)
    for sv, vals in zip(sign_vectors, results):
        total += int(np.prod(sv)) * vals
    out = np.empty_like(total)
    out[order] = total
    return out
