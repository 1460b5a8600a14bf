"""Pseudo-abelian integrals ``I(h) = oint_{gamma(h)} eta / M`` and sweeps over h."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .cycles import Cycle, cycle_length, segment_graph
from .darboux import DarbouxSystem, OneForm, UnfoldingParams
from .errors import PoleOnContour, ToleranceNotMet
from .foliation import Foliation, darboux_foliation
from .polynomial import PolyStack
from .tracer import NestInfo, TraceTolerances, interior_extremum, trace_oval, trace_ovals

__all__ = [
    "QuadResult",
    "SweepResult",
    "integrate_form",
    "integrate_form_detailed",
    "pseudo_abelian_integral",
    "integral_detailed",
    "sweep",
    "h_grid",
    "count_sign_changes",
]

_GL_ORDER = 10
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)


@dataclass
class QuadResult:
    value: complex
    error: float
    l1: float  # integral of |integrand| |dt|, the scale for "numerically zero"
    intervals: int
    length: float


def _integrand(fol: Foliation, stack: PolyStack, cyc: Cycle, st, seg_i, seg_j, ta, tb):
    """Integrand samples on ``[ta, tb]`` of segments ``(seg_i, seg_j)``: returns ``(vals, weights)``."""
    half = 0.5 * (tb - ta)
    t = 0.5 * (ta + tb)[:, None] + half[:, None] * _GL_X[None, :]
    X, V, _, ok = segment_graph(
        fol, cyc.points[seg_i], cyc.logs[seg_i], st.take(seg_i), cyc.points[seg_j],
        st.theta[seg_j], cyc.log_level, t,
    )
    flat = X.reshape(-1, 2)
    ab = stack.values(flat[:, 0], flat[:, 1]).reshape(2, *X.shape[:2])
    M = fol.integrating_factor(flat).reshape(X.shape[:2])
    if np.any(M == 0) or not np.all(np.isfinite(M)):
        raise PoleOnContour("integrating factor vanishes on the cycle", operation="integrate_form")
    f = (ab[0] * V[..., 0] + ab[1] * V[..., 1]) / M
    return f, half[:, None] * _GL_W[None, :], ok


def integrate_form_detailed(
    cycle: Cycle,
    sys: DarbouxSystem,
    params: UnfoldingParams,
    eta: OneForm,
    *,
    rtol: float = 1e-12,
    max_levels: int = 30,
    foliation: Foliation | None = None,
) -> QuadResult:
    """Adaptive composite Gauss-Legendre quadrature of ``eta / M`` along the cycle.

    Each marker-to-marker arc is parametrized exactly on the leaf (graph over
    its chord) and integrated with a fixed-order rule; an arc is split in
    halves while the one-panel and two-panel results disagree by more than
    its share of the tolerance.
    """
    fol = foliation or darboux_foliation(sys, params)
    if cycle.logs is None:
        cycle = Cycle(cycle.points, cycle.log_level, cycle.closed,
                      fol.principal_logs(fol.evaluate(cycle.points)))
    st = fol.evaluate(cycle.points)
    M0 = fol.integrating_factor(cycle.points)
    if np.any(M0 == 0) or not np.all(np.isfinite(M0)):
        k = int(np.flatnonzero((M0 == 0) | ~np.isfinite(M0))[0])
        raise PoleOnContour(f"integrating factor vanishes at marker {k}", operation="integrate_form",
                            data={"marker": k, "point": cycle.points[k].tolist()})
    if eta.a.is_zero() and eta.b.is_zero():
        return QuadResult(0j, 0.0, 0.0, 0, cycle_length(cycle))
    stack = PolyStack([eta.a, eta.b])
    seg_i, seg_j = cycle.segments()
    ta = np.zeros(len(seg_i))
    tb = np.ones(len(seg_i))

    def panel(si, sj, a, b):
        f, w, ok = _integrand(fol, stack, cycle, st, si, sj, a, b)
        if not np.all(ok):
            raise PoleOnContour("leaf parametrization failed between markers", operation="integrate_form")
        return np.sum(f * w, axis=1), np.sum(np.abs(f) * np.abs(w), axis=1)

    whole, l1 = panel(seg_i, seg_j, ta, tb)
    total_l1 = float(np.sum(l1))
    atol_total = rtol * max(total_l1, 1e-300)
    span = np.ones(len(seg_i))
    total = 0j
    err_total = 0.0
    intervals = 0
    for _ in range(max_levels):
        mid = 0.5 * (ta + tb)
        left, _ = panel(seg_i, seg_j, ta, mid)
        right, _ = panel(seg_i, seg_j, mid, tb)
        fine = left + right
        err = np.abs(fine - whole)
        done = err <= np.maximum(atol_total * span, rtol * np.abs(fine))
        total += np.sum(fine[done])
        err_total += float(np.sum(err[done]))
        intervals += int(np.sum(done))
        if np.all(done):
            break
        keep = ~done
        seg_i = np.concatenate([seg_i[keep], seg_i[keep]])
        seg_j = np.concatenate([seg_j[keep], seg_j[keep]])
        new_ta = np.concatenate([ta[keep], mid[keep]])
        new_tb = np.concatenate([mid[keep], tb[keep]])
        whole = np.concatenate([left[keep], right[keep]])
        span = np.concatenate([span[keep], span[keep]]) * 0.5
        ta, tb = new_ta, new_tb
    else:
        raise ToleranceNotMet(
            f"quadrature did not reach rtol={rtol} after {max_levels} refinements",
            operation="integrate_form", data={"remaining": int(len(ta))},
        )
    return QuadResult(complex(total), err_total, total_l1, intervals, cycle_length(cycle))


def integrate_form(cycle: Cycle, sys: DarbouxSystem, params: UnfoldingParams, eta: OneForm,
                   **kw) -> complex:
    """``oint_cycle eta / M``; counterclockwise for ovals produced by the tracer."""
    return integrate_form_detailed(cycle, sys, params, eta, **kw).value


@dataclass
class IntegralValue:
    h: float
    value: float
    imag_discarded: float
    error: float
    l1: float
    length: float
    markers: int


def integral_detailed(sys, params, eta, h, *, tolerances: TraceTolerances | None = None,
                      nest: NestInfo | None = None, rtol: float = 1e-12,
                      cycle: Cycle | None = None) -> IntegralValue:
    cyc = cycle if cycle is not None else trace_oval(sys, params, h, tolerances, nest=nest)
    q = integrate_form_detailed(cyc, sys, params, eta, rtol=rtol)
    return IntegralValue(float(h), q.value.real, q.value.imag, q.error, q.l1, q.length, cyc.n)


def pseudo_abelian_integral(sys: DarbouxSystem, params: UnfoldingParams, eta: OneForm, h: float,
                            **kw) -> float:
    """``I(h)`` on the real oval; the (roundoff) imaginary part is dropped."""
    return integral_detailed(sys, params, eta, h, **kw).value


# --- sweeps ------------------------------------------------------------------

@dataclass
class SweepResult:
    params: UnfoldingParams
    h_samples: np.ndarray
    i_values: np.ndarray
    errors: np.ndarray
    l1: np.ndarray
    zeros: list[float]
    zero_threshold: float
    b: float
    min_reachable_h: float
    unreachable: list[float] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def zero_count(self) -> int:
        return len(self.zeros)

    def to_csv(self, path) -> None:
        lines = ["h,I,err_estimate"]
        for h, v, e in zip(self.h_samples, self.i_values, self.errors):
            lines.append(f"{h:.17g},{v:.17g},{e:.17g}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def h_grid(b: float, n: int = 50, *, h_min: float | None = None, h_max_frac: float = 0.95,
           log: bool = True) -> np.ndarray:
    """Increasing grid in ``(0, b)``; log-spaced toward 0 by default."""
    h_max = h_max_frac * b
    h_min = h_min if h_min is not None else 1e-6 * b
    if log:
        return np.geomspace(h_min, h_max, n)
    return np.linspace(h_min, h_max, n)


def count_sign_changes(values: np.ndarray, threshold: float) -> list[int]:
    """Indices ``i`` such that a sign change happens between sample ``i`` and the next nonzero one."""
    idx = np.flatnonzero(np.abs(values) > threshold)
    out = []
    for a, b in zip(idx[:-1], idx[1:]):
        if np.sign(values[a]) != np.sign(values[b]):
            out.append(int(a) if b == a + 1 else int(a))
    return out


def _sample_chunk(args):
    sys, params, eta, hs, tol, nest, rtol = args
    out = []
    cycles = trace_ovals(sys, params, hs, tol, nest=nest)
    for h, cyc in zip(hs, cycles):
        q = integrate_form_detailed(cyc, sys, params, eta, rtol=rtol)
        out.append((float(h), q.value.real, q.error, q.l1))
    return out


def sweep(
    sys: DarbouxSystem,
    params: UnfoldingParams,
    eta: OneForm,
    h_samples=None,
    *,
    n: int = 50,
    h_min: float | None = None,
    tolerances: TraceTolerances | None = None,
    rtol: float = 1e-12,
    zero_rel: float = 1e-12,
    zero_l1: float = 1e-9,
    refine: bool = True,
    jobs: int = 1,
    nest: NestInfo | None = None,
) -> SweepResult:
    """Sample ``I`` on an h-grid, count sign changes and refine each zero by bracketing.

    A sample counts as numerically zero when
    ``|I| <= max(zero_rel * max|I|, zero_l1 * L1)`` where ``L1`` is the
    integral of the absolute integrand on that oval: the second term keeps
    the roundoff of an identically vanishing integral out of the count.
    """
    nest = nest or interior_extremum(sys, params)
    hs = np.asarray(h_samples if h_samples is not None else h_grid(nest.b, n, h_min=h_min), dtype=float)
    if np.any(np.diff(hs) <= 0):
        raise ValueError("h samples must be strictly increasing")
    chunks = [hs[i::max(jobs, 1)] for i in range(max(jobs, 1))]
    args = [(sys, params, eta, c, tolerances, nest, rtol) for c in chunks if len(c)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_sample_chunk, args))
    else:
        parts = [_sample_chunk(a) for a in args]
    rows = sorted((r for p in parts for r in p), key=lambda r: r[0])
    h_arr = np.array([r[0] for r in rows])
    vals = np.array([r[1] for r in rows])
    errs = np.array([r[2] for r in rows])
    l1 = np.array([r[3] for r in rows])
    thr_each = np.maximum(zero_rel * np.max(np.abs(vals)), zero_l1 * l1)
    nonzero = np.abs(vals) > thr_each
    zeros = []
    idx = np.flatnonzero(nonzero)
    for a, b_ in zip(idx[:-1], idx[1:]):
        if np.sign(vals[a]) == np.sign(vals[b_]):
            continue
        lo, hi = h_arr[a], h_arr[b_]
        if refine:
            f = lambda h: integral_detailed(sys, params, eta, h, tolerances=tolerances, nest=nest,
                                            rtol=rtol).value
            z = optimize.brentq(f, lo, hi, xtol=1e-10 * lo, rtol=1e-10, maxiter=200)
        else:
            z = lo - vals[a] * (hi - lo) / (vals[b_] - vals[a])
        zeros.append(float(z))
    return SweepResult(
        params=params, h_samples=h_arr, i_values=vals, errors=errs, l1=l1, zeros=zeros,
        zero_threshold=float(np.max(thr_each)), b=nest.b, min_reachable_h=float(h_arr[0]),
        diagnostics={"nonzero_samples": int(np.sum(nonzero)), "rtol": rtol},
    )
