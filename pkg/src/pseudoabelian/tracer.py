"""Locating the nest and tracing its real ovals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cycles import Cycle
from .darboux import DarbouxSystem, UnfoldingParams, log_first_integral
from .errors import (
    DomainError,
    LevelNotBracketed,
    MaxStepsExceeded,
    NoCriticalPoint,
    ProjectionDivergence,
    StepCollapse,
)
from .foliation import darboux_foliation

__all__ = [
    "NestInfo",
    "TraceTolerances",
    "interior_extremum",
    "find_seed",
    "trace_oval",
    "trace_ovals",
    "log_h_real",
]


@dataclass(frozen=True)
class NestInfo:
    center: tuple[float, float]
    b: float
    log_b: float
    hessian: tuple[tuple[float, float], tuple[float, float]]


@dataclass(frozen=True)
class TraceTolerances:
    level_tol: float = 1e-13  # |log H - log h| after correction
    max_step: float | None = None  # default: 0.02 * region diameter
    min_step: float = 1e-10
    deviation: float = 0.01  # target correction distance / step
    max_steps: int = 20000
    newton_iter: int = 8


def log_h_real(sys: DarbouxSystem, params: UnfoldingParams, P: np.ndarray) -> np.ndarray:
    """Vectorized real ``log H``; ``-inf`` outside the positive domain."""
    fol = darboux_foliation(sys, params)
    P = np.asarray(P, dtype=float).reshape(-1, 2)
    st = fol.evaluate(P)
    plain = st.plain.real
    ok = np.all(plain > 0, axis=1)
    g = st.near.real
    eps = params.eps
    with np.errstate(divide="ignore", invalid="ignore"):
        if eps != 0:
            ok &= eps * g > -1
            near = np.log1p(np.where(ok, eps * g, 0.0)) / eps
        else:
            near = g
        val = np.log(np.where(ok[:, None], plain, 1.0)) @ fol.coef + near
    return np.where(ok & np.isfinite(val), val, -np.inf)


def _theta_real(sys, params, p):
    st = darboux_foliation(sys, params).evaluate(np.asarray(p, dtype=float).reshape(-1, 2))
    return st.theta.real


def _newton_critical(sys, params, p, tol=1e-14, maxiter=50):
    p = np.array(p, dtype=float)
    for _ in range(maxiter):
        g = _theta_real(sys, params, p)[0]
        hstep = 1e-6 * max(1.0, float(np.max(np.abs(p))))
        pts = np.array([p + [hstep, 0], p - [hstep, 0], p + [0, hstep], p - [0, hstep]])
        th = _theta_real(sys, params, pts)
        J = np.column_stack([(th[0] - th[1]) / (2 * hstep), (th[2] - th[3]) / (2 * hstep)])
        J = 0.5 * (J + J.T)
        try:
            step = np.linalg.solve(J, g)
        except np.linalg.LinAlgError:
            return None, None
        p = p - step
        if not np.all(np.isfinite(p)):
            return None, None
        if np.linalg.norm(step) < tol * max(1.0, np.linalg.norm(p)):
            break
    return p, J


def interior_extremum(sys: DarbouxSystem, params: UnfoldingParams, region=None, *, grid: int = 41) -> NestInfo:
    """Interior maximizer of ``H`` (the nest center) and ``b = H(center)``."""
    xmin, xmax, ymin, ymax = region if region is not None else sys.region
    xs = np.linspace(xmin, xmax, grid)[1:-1]
    ys = np.linspace(ymin, ymax, grid)[1:-1]
    X, Y = np.meshgrid(xs, ys)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    vals = log_h_real(sys, params, pts)
    if not np.any(np.isfinite(vals)):
        raise NoCriticalPoint("first integral is not defined anywhere in the region",
                              operation="interior_extremum")
    order = np.argsort(-vals)
    for k in order[:5]:
        if not np.isfinite(vals[k]):
            break
        p, J = _newton_critical(sys, params, pts[k])
        if p is None:
            continue
        if not (xmin < p[0] < xmax and ymin < p[1] < ymax):
            continue
        lv = log_h_real(sys, params, p)[0]
        if not np.isfinite(lv) or lv < vals[k] - 1e-12:
            continue
        if np.linalg.norm(_theta_real(sys, params, p)[0]) > 1e-8:
            continue
        if np.any(np.linalg.eigvalsh(J) >= 0):
            continue
        return NestInfo(center=(float(p[0]), float(p[1])), b=math.exp(lv), log_b=float(lv),
                        hessian=tuple(map(tuple, J.tolist())))
    raise NoCriticalPoint("no nondegenerate interior maximum of H found", operation="interior_extremum")


def _ray_exit(sys, params, c, direction, rmax):
    """Largest ``r`` such that the segment ``c + [0, r] direction`` stays in the domain."""
    rs = np.linspace(0, rmax, 2001)[1:]
    vals = log_h_real(sys, params, c[None, :] + rs[:, None] * direction[None, :])
    bad = np.flatnonzero(~np.isfinite(vals))
    if len(bad) == 0:
        return rmax
    lo = rs[bad[0] - 1] if bad[0] > 0 else 0.0
    hi = rs[bad[0]]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if np.isfinite(log_h_real(sys, params, c + mid * direction)[0]):
            lo = mid
        else:
            hi = mid
    return lo


def find_seed(sys: DarbouxSystem, params: UnfoldingParams, h: float, *, nest: NestInfo | None = None,
              angle: float = 0.0) -> np.ndarray:
    """Point of ``{H = h}`` on the ray from the nest center in direction ``angle``."""
    nest = nest or interior_extremum(sys, params)
    c = np.array(nest.center)
    if not h > 0:
        raise LevelNotBracketed(f"level {h} is not positive", operation="find_seed")
    if h > nest.b * (1 + 1e-12):
        raise LevelNotBracketed(f"level {h} is above the nest maximum b = {nest.b}", operation="find_seed")
    if h >= nest.b:
        return c.copy()
    lh = math.log(h)
    direction = np.array([math.cos(angle), math.sin(angle)])
    xmin, xmax, ymin, ymax = sys.region
    rmax = 2.0 * math.hypot(xmax - xmin, ymax - ymin)
    r_exit = _ray_exit(sys, params, c, direction, rmax)
    f = lambda r: log_h_real(sys, params, c + r * direction)[0] - lh
    lo, hi = 0.0, r_exit
    if not f(hi) < 0:
        raise LevelNotBracketed(f"level {h} not reached along the ray", operation="find_seed")
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    r = lo if abs(f(lo)) < abs(f(hi)) else hi
    # a Newton polish in the radial variable
    for _ in range(3):
        th = _theta_real(sys, params, c + r * direction)[0]
        dr = f(r) / float(th @ direction)
        if abs(dr) > 1e-3 * max(r, 1e-300):
            break
        r -= dr
    return c + r * direction


def _correct(fol, P, lh, tol, maxiter):
    """Newton along the gradient of log H, vectorized over levels."""
    P = P.copy()
    conv = np.zeros(len(P), dtype=bool)
    for _ in range(maxiter):
        st = fol.evaluate(P)
        plain = st.plain.real
        inside = np.all(plain > 0, axis=1)
        if fol.near_scale != 0:
            inside &= fol.near_scale * st.near.real > -1
        logs = fol.principal_logs(st).real
        r = np.where(inside, fol.log_h(logs) - lh, np.nan)
        th = st.theta.real
        conv = inside & (np.abs(r) <= tol)
        if np.all(conv | ~inside):
            break
        step = th * (np.where(conv | ~inside, 0.0, r) / np.sum(th * th, axis=1))[:, None]
        P = P - step
    st = fol.evaluate(P)
    inside = np.all(st.plain.real > 0, axis=1)
    if fol.near_scale != 0:
        inside &= fol.near_scale * st.near.real > -1
    logs = fol.principal_logs(st).real
    r = np.where(inside, fol.log_h(logs) - lh, np.nan)
    conv = inside & (np.abs(r) <= tol)
    return P, conv, st


def trace_ovals(sys: DarbouxSystem, params: UnfoldingParams, hs, tolerances: TraceTolerances | None = None,
                *, nest: NestInfo | None = None) -> list[Cycle]:
    """Trace the nest ovals at several levels at once (vectorized over levels)."""
    tol = tolerances or TraceTolerances()
    nest = nest or interior_extremum(sys, params)
    fol = darboux_foliation(sys, params)
    hs = np.atleast_1d(np.asarray(hs, dtype=float))
    for h in hs:
        if not 0 < h < nest.b:
            raise LevelNotBracketed(f"level {h} outside (0, b={nest.b})", operation="trace_oval")
    xmin, xmax, ymin, ymax = sys.region
    diam = math.hypot(xmax - xmin, ymax - ymin)
    max_step = tol.max_step or 0.02 * diam
    c = np.array(nest.center)
    lh = np.log(hs)
    m = len(hs)

    seeds = np.array([find_seed(sys, params, h, nest=nest) for h in hs])
    seeds, ok, _ = _correct(fol, seeds, lh, tol.level_tol, tol.newton_iter)
    if not np.all(ok):
        raise ProjectionDivergence("could not project seeds to their levels", operation="trace_oval")
    # initial step from the oval size along the seed ray
    s = np.minimum(max_step, 0.05 * np.linalg.norm(seeds - c, axis=1))
    paths = [[p.copy()] for p in seeds]
    P = seeds.copy()
    ang = np.zeros(m)
    active = np.ones(m, dtype=bool)
    steps = np.zeros(m, dtype=int)
    prev_angle = np.arctan2(P[:, 1] - c[1], P[:, 0] - c[0])

    while np.any(active):
        idx = np.flatnonzero(active)
        Pa = P[idx]
        st = fol.evaluate(Pa)
        th = st.theta.real
        tang = np.column_stack([th[:, 1], -th[:, 0]])
        tang /= np.linalg.norm(tang, axis=1)[:, None]
        sa = s[idx]
        # midpoint predictor
        mid = Pa + 0.5 * sa[:, None] * tang
        thm = fol.evaluate(mid).theta.real
        tm = np.column_stack([thm[:, 1], -thm[:, 0]])
        tm /= np.linalg.norm(tm, axis=1)[:, None]
        tm = np.where(np.isfinite(tm), tm, tang)
        pred = Pa + sa[:, None] * tm
        corr, conv, stc = _correct(fol, pred, lh[idx], tol.level_tol, tol.newton_iter)
        dist = np.linalg.norm(corr - pred, axis=1)
        ratio = dist / sa
        # factor values may not change by more than a bounded ratio per step;
        # this keeps steps short where the oval hugs an invariant curve
        with np.errstate(divide="ignore", invalid="ignore"):
            lr = np.max(np.abs(np.log(stc.plain.real / st.plain.real)), axis=1)
        lr = np.where(np.isfinite(lr), lr, np.inf)
        aligned = np.sum(tm * tang, axis=1) > 0.5
        conv = conv & aligned
        accept = conv & (ratio <= 4 * tol.deviation) & (lr <= 0.5) & np.all(np.isfinite(corr), axis=1)
        # adapt
        fac = np.where(conv & (ratio > 0), 0.9 * np.sqrt(tol.deviation / np.maximum(ratio, 1e-300)), 2.0)
        fac = np.minimum(fac, np.where(lr > 0, 0.25 / lr, 2.0))
        fac = np.clip(fac, 0.5, 2.0)
        fac = np.where(conv, fac, 0.5)
        snew = np.minimum(sa * fac, max_step)
        for k_local, k in enumerate(idx):
            steps[k] += 1
            if steps[k] > tol.max_steps:
                raise MaxStepsExceeded(f"oval at h={hs[k]} not closed after {tol.max_steps} steps",
                                       operation="trace_oval",
                                       data={"h": float(hs[k]), "point": P[k].tolist(), "step": float(s[k]),
                                             "angle": float(ang[k])})
            if not accept[k_local]:
                s[k] = snew[k_local]
                if s[k] < tol.min_step:
                    raise StepCollapse(
                        f"step size fell below {tol.min_step} at h={hs[k]} (polycycle regime)",
                        operation="trace_oval", data={"h": float(hs[k]), "point": Pa[k_local].tolist()},
                    )
                continue
            q = corr[k_local]
            a_new = math.atan2(q[1] - c[1], q[0] - c[0])
            da = (a_new - prev_angle[k] + math.pi) % (2 * math.pi) - math.pi
            ang[k] += da
            prev_angle[k] = a_new
            dseed = float(np.linalg.norm(q - seeds[k]))
            if ang[k] > 1.5 * math.pi and dseed <= max(sa[k_local], 1e-300):
                # seed is within one step: the closing segment completes the oval
                if abs(ang[k] + math.atan2(
                        (seeds[k][1] - c[1]) * math.cos(a_new) - (seeds[k][0] - c[0]) * math.sin(a_new),
                        (seeds[k][0] - c[0]) * math.cos(a_new) + (seeds[k][1] - c[1]) * math.sin(a_new))
                        - 2 * math.pi) > 0.5:
                    raise ProjectionDivergence(f"winding sanity check failed at h={hs[k]}",
                                               operation="trace_oval")
                if dseed > 1e-3 * sa[k_local]:
                    paths[k].append(q)
                active[k] = False
                continue
            paths[k].append(q)
            P[k] = q
            s[k] = snew[k_local]
            if ang[k] > 1.5 * math.pi:
                # do not step past the seed
                s[k] = min(s[k], max(dseed, tol.min_step * 2))
        if steps.max() > tol.max_steps:
            break

    out = []
    for k, h in enumerate(hs):
        pts = np.array(paths[k], dtype=complex)
        logs = fol.principal_logs(fol.evaluate(pts))
        out.append(Cycle(pts, complex(lh[k]), closed=True, logs=logs,
                         meta={"h": float(h), "eps": params.eps, "alpha": params.alpha,
                               "max_step": max_step}))
    return out


def trace_oval(sys: DarbouxSystem, params: UnfoldingParams, h: float,
               tolerances: TraceTolerances | None = None, *, nest: NestInfo | None = None) -> Cycle:
    """Closed counterclockwise oval ``gamma(h)`` of the nest."""
    return trace_ovals(sys, params, [h], tolerances, nest=nest)[0]
