"""Cycles on level sets and the geometry shared by tracer, integrator and transport."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .foliation import Foliation, FoliationState

__all__ = [
    "Cycle",
    "ProjectionResult",
    "project_to_level",
    "segment_graph",
    "refine_segments",
    "densify",
    "cycle_deviation",
    "shoelace_area",
    "cycle_length",
    "point_in_polygon",
]


@dataclass
class Cycle:
    """Ordered markers on ``{log H = log_level}``.

    ``logs`` holds the branch of every factor logarithm at every marker, so
    that ``foliation.log_h(logs)`` reproduces ``log_level`` marker by marker.
    A closed cycle does not repeat its first point at the end.
    """

    points: np.ndarray
    log_level: complex
    closed: bool = True
    logs: np.ndarray | None = None
    chart_tags: list[str] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=complex).reshape(-1, 2)
        self.log_level = complex(self.log_level)

    @property
    def level(self) -> complex:
        return complex(np.exp(self.log_level))

    @property
    def n(self) -> int:
        return len(self.points)

    def copy(self) -> "Cycle":
        return replace(
            self,
            points=self.points.copy(),
            logs=None if self.logs is None else self.logs.copy(),
            chart_tags=None if self.chart_tags is None else list(self.chart_tags),
            meta=dict(self.meta),
        )

    def reversed(self) -> "Cycle":
        """Same cycle traversed the other way, starting from the same marker."""
        idx = np.r_[0, np.arange(self.n - 1, 0, -1)] if self.closed else np.arange(self.n - 1, -1, -1)
        return replace(
            self,
            points=self.points[idx],
            logs=None if self.logs is None else self.logs[idx],
            chart_tags=None if self.chart_tags is None else [self.chart_tags[i] for i in idx],
            meta=dict(self.meta),
        )

    def conjugate(self) -> "Cycle":
        """Complex conjugate cycle; a cycle on ``{H = h}`` goes to ``{H = conj h}``."""
        return replace(
            self,
            points=np.conj(self.points),
            log_level=np.conj(self.log_level),
            logs=None if self.logs is None else np.conj(self.logs),
            meta=dict(self.meta),
        )

    def segments(self):
        """Index pairs ``(i, j)`` of consecutive markers, including the closing one."""
        i = np.arange(self.n if self.closed else self.n - 1)
        return i, (i + 1) % self.n

    def spacing(self) -> np.ndarray:
        i, j = self.segments()
        return np.linalg.norm(self.points[j] - self.points[i], axis=1)

    def level_residual(self, fol: Foliation) -> float:
        """Largest ``|H(p) / level - 1|`` over markers, using the stored branches."""
        st = fol.evaluate(self.points)
        if self.logs is None:
            logs = fol.principal_logs(st)
        else:
            inc, _ = fol.increments(st, st)
            logs = self.logs + inc
        d = fol.log_h(logs) - self.log_level
        return float(np.max(np.abs(np.expm1(d))))

    def to_csv(self, path, params: dict | None = None) -> None:
        header = [f"# level_re={self.level.real:.17g}", f"level_im={self.level.imag:.17g}",
                  f"closed={int(self.closed)}", f"n={self.n}"]
        for k, v in (params or {}).items():
            header.append(f"{k}={v:.17g}" if isinstance(v, float) else f"{k}={v}")
        lines = [" ".join(header), "re_x,im_x,re_y,im_y"]
        for x, y in self.points:
            lines.append(f"{x.real:.17g},{x.imag:.17g},{y.real:.17g},{y.imag:.17g}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path) -> "Cycle":
        text = Path(path).read_text().splitlines()
        head = dict(tok.split("=", 1) for tok in text[0].lstrip("# ").split())
        data = np.array([[float(v) for v in line.split(",")] for line in text[2:] if line.strip()])
        pts = np.column_stack([data[:, 0] + 1j * data[:, 1], data[:, 2] + 1j * data[:, 3]])
        level = complex(float(head["level_re"]), float(head["level_im"]))
        return cls(pts, np.log(level), closed=bool(int(head.get("closed", 1))))


@dataclass
class ProjectionResult:
    points: np.ndarray
    logs: np.ndarray
    state: FoliationState
    residual: np.ndarray
    converged: np.ndarray
    branch_ok: np.ndarray


def project_to_level(
    fol: Foliation,
    P: np.ndarray,
    ref_logs: np.ndarray,
    ref_state: FoliationState,
    target,
    *,
    tol: float = 1e-13,
    maxiter: int = 12,
) -> ProjectionResult:
    """Newton along the lift field until ``log H = target`` on the branch continued from the reference.

    ``target`` may be a scalar or one value per point.
    """
    P = np.array(P, dtype=complex).reshape(-1, 2)
    target = np.broadcast_to(np.asarray(target, dtype=complex), (len(P),))
    st = fol.evaluate(P)
    inc, ok = fol.increments(ref_state, st)
    logs = ref_logs + inc
    r = fol.log_h(logs) - target
    active = np.abs(r) > tol
    for _ in range(maxiter):
        if not np.any(active):
            break
        idx = np.flatnonzero(active)
        L = fol.lift(P[idx], st.take(idx))
        Pn = P[idx] - L * r[idx, None]
        stn = fol.evaluate(Pn)
        incn, okn = fol.increments(ref_state.take(idx), stn)
        logsn = ref_logs[idx] + incn
        rn = fol.log_h(logsn) - target[idx]
        good = np.isfinite(rn) & np.all(np.isfinite(Pn), axis=1)
        gidx = idx[good]
        P[gidx] = Pn[good]
        st.plain[gidx] = stn.plain[good]
        if st.near is not None:
            st.near[gidx] = stn.near[good]
        st.theta[gidx] = stn.theta[good]
        logs[gidx] = logsn[good]
        ok[gidx] = okn[good]
        r[gidx] = rn[good]
        active[idx[~good]] = False
        active[gidx] = np.abs(rn[good]) > tol
    res = np.abs(r)
    return ProjectionResult(P, logs, st, res, res <= max(tol * 10, 1e-12), ok)


def segment_graph(
    fol: Foliation,
    P0: np.ndarray,
    logs0: np.ndarray,
    st0: FoliationState,
    P1: np.ndarray,
    theta1: np.ndarray,
    target,
    t: np.ndarray,
    *,
    tol: float = 1e-14,
    maxiter: int = 20,
):
    """Points of the leaf between marker pairs, as graphs over their chords.

    For segment ``m`` with chord ``d = P1 - P0`` and transversal
    ``n ~ conj(theta)`` the leaf is written ``c(t) + s(t) n`` with
    ``c(t) = P0 + t d``.  ``t`` holds either shared parameters ``(q,)`` or
    one row per segment ``(m, q)``.  Returns ``(points, velocity, logs, ok)`` with
    shapes ``(m, q, 2)``, ``(m, q, 2)``, ``(m, q, n_logs)`` and ``(m,)``.
    """
    m = len(P0)
    t = np.broadcast_to(np.asarray(t, dtype=float), (m, np.shape(t)[-1]))
    q = t.shape[1]
    d = P1 - P0
    nvec = np.conj(st0.theta + theta1)
    nvec /= np.linalg.norm(nvec, axis=1)[:, None]
    target = np.broadcast_to(np.asarray(target, dtype=complex), (m,))
    C = P0[:, None, :] + t[:, :, None] * d[:, None, :]
    C = C.reshape(-1, 2)
    N = np.repeat(nvec, q, axis=0)
    ref_idx = np.repeat(np.arange(m), q)
    ref_st = st0.take(ref_idx)
    ref_logs = logs0[ref_idx]
    tgt = target[ref_idx]
    s = np.zeros(m * q, dtype=complex)
    conv = np.zeros(m * q, dtype=bool)
    for _ in range(maxiter):
        X = C + s[:, None] * N
        st = fol.evaluate(X)
        inc, ok = fol.increments(ref_st, st)
        logs = ref_logs + inc
        r = fol.log_h(logs) - tgt
        conv = np.abs(r) <= tol * max(1.0, float(np.max(np.abs(tgt))))
        if np.all(conv):
            break
        dn = np.sum(st.theta * N, axis=1)
        s = s - np.where(conv, 0.0, r / dn)
    X = C + s[:, None] * N
    st = fol.evaluate(X)
    inc, ok = fol.increments(ref_st, st)
    logs = ref_logs + inc
    r = fol.log_h(logs) - tgt
    D = np.repeat(d, q, axis=0)
    sp = -np.sum(st.theta * D, axis=1) / np.sum(st.theta * N, axis=1)
    V = D + sp[:, None] * N
    good = (np.abs(r) <= 1e-9) & ok & np.isfinite(sp)
    seg_ok = good.reshape(m, q).all(axis=1)
    return X.reshape(m, q, 2), V.reshape(m, q, 2), logs.reshape(m, q, -1), seg_ok


def _midpoints(fol, cyc: Cycle, st: FoliationState, i, j):
    """Leaf points over chord midpoints of segments ``(i, j)`` and their chord deviation."""
    X, _, logs, ok = segment_graph(
        fol, cyc.points[i], cyc.logs[i], st.take(i), cyc.points[j], st.theta[j],
        cyc.log_level, np.array([0.5]),
    )
    X = X[:, 0, :]
    chord = np.linalg.norm(cyc.points[j] - cyc.points[i], axis=1)
    mid = 0.5 * (cyc.points[i] + cyc.points[j])
    dev = np.linalg.norm(X - mid, axis=1) / np.where(chord > 0, chord, 1.0)
    return X, logs[:, 0, :], dev, ok


def refine_segments(
    fol: Foliation,
    cyc: Cycle,
    *,
    max_spacing: float,
    max_dev: float = 0.1,
    max_points: int = 8192,
    passes: int = 8,
    state: FoliationState | None = None,
) -> tuple[Cycle, FoliationState]:
    """Insert leaf points at chord midpoints until spacing and deviation limits hold."""
    st = fol.evaluate(cyc.points) if state is None else state
    for _ in range(passes):
        i, j = cyc.segments()
        chord = np.linalg.norm(cyc.points[j] - cyc.points[i], axis=1)
        X, logs, dev, ok = _midpoints(fol, cyc, st, i, j)
        need = ((chord > max_spacing) | (dev > max_dev)) & ok
        if not np.any(need):
            break
        room = max_points - cyc.n
        if room <= 0:
            break
        sel = np.flatnonzero(need)[:room]
        cyc, st = _insert_after(fol, cyc, st, i[sel], X[sel], logs[sel])
    return cyc, st


def _insert_after(fol, cyc: Cycle, st: FoliationState, after, X, logs):
    n = cyc.n
    order_key = np.concatenate([np.arange(n, dtype=float), after + 0.5])
    order = np.argsort(order_key, kind="stable")
    pts = np.concatenate([cyc.points, X])[order]
    lg = np.concatenate([cyc.logs, logs])[order]
    stX = fol.evaluate(X)
    st_all = FoliationState.concat([st, stX]).take(order)
    tags = None
    if cyc.chart_tags is not None:
        tags = list(cyc.chart_tags) + [cyc.chart_tags[k] for k in after]
        tags = [tags[k] for k in order]
    out = replace(cyc, points=pts, logs=lg, chart_tags=tags, meta=dict(cyc.meta))
    return out, st_all


def densify(fol: Foliation, cyc: Cycle, *, max_dev: float = 1e-4, max_spacing: float | None = None,
            max_points: int = 200000) -> Cycle:
    """Finer copy of a cycle, for distance measurements."""
    if cyc.logs is None:
        cyc = replace(cyc, logs=fol.principal_logs(fol.evaluate(cyc.points)))
    spacing = max_spacing if max_spacing is not None else float(np.max(cyc.spacing()))
    out, _ = refine_segments(fol, cyc, max_spacing=spacing, max_dev=max_dev,
                             max_points=max_points, passes=40)
    return out


def _point_segment_distance(p, a, b):
    d = b - a
    dd = np.sum(np.abs(d) ** 2, axis=-1)
    t = np.real(np.sum(np.conj(d) * (p - a), axis=-1)) / np.where(dd > 0, dd, 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.linalg.norm(p - a - t[..., None] * d, axis=-1)


def _directed_distance(A: np.ndarray, B: np.ndarray, closed: bool) -> float:
    realB = np.column_stack([B.real, B.imag])
    realA = np.column_stack([A.real, A.imag])
    tree = cKDTree(realB)
    k = min(4, len(B))
    _, nn = tree.query(realA, k=k)
    nn = np.atleast_2d(nn).reshape(len(A), -1)
    n = len(B)
    best = np.full(len(A), np.inf)
    for col in range(nn.shape[1]):
        idx = nn[:, col]
        for nb in (idx - 1, idx + 1):
            if closed:
                nb = nb % n
                valid = np.ones(len(A), dtype=bool)
            else:
                valid = (nb >= 0) & (nb < n)
                nb = np.clip(nb, 0, n - 1)
            dist = _point_segment_distance(A, B[idx], B[nb])
            best = np.where(valid, np.minimum(best, dist), best)
    return float(np.max(best))


def _arc_distance(fol: Foliation, A: np.ndarray, cyc: Cycle, st: FoliationState) -> np.ndarray:
    """Distance from each point of ``A`` to the leaf arcs of ``cyc`` near it."""
    B = cyc.points
    n = len(B)
    tree = cKDTree(np.column_stack([B.real, B.imag]))
    _, nn = tree.query(np.column_stack([A.real, A.imag]), k=1)
    cand_i, cand_p = [], []
    for off in (-1, 0):
        i = nn + off
        if cyc.closed:
            i = i % n
            valid = np.ones(len(A), dtype=bool)
        else:
            valid = (i >= 0) & (i < n - 1)
        cand_i.append(i[valid])
        cand_p.append(np.flatnonzero(valid))
    si = np.concatenate(cand_i)
    pi = np.concatenate(cand_p)
    sj = (si + 1) % n
    P = A[pi]

    def dist(t):
        X, _, _, _ = segment_graph(fol, B[si], cyc.logs[si], st.take(si), B[sj], st.theta[sj],
                                   cyc.log_level, t[:, None])
        return np.linalg.norm(X[:, 0, :] - P, axis=1)

    # golden-section search on each arc
    g = (np.sqrt(5.0) - 1) / 2
    lo = np.zeros(len(si))
    hi = np.ones(len(si))
    x1 = hi - g * (hi - lo)
    x2 = lo + g * (hi - lo)
    f1, f2 = dist(x1), dist(x2)
    for _ in range(45):
        left = f1 < f2
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        x2n = np.where(left, x1, lo + g * (hi - lo))
        x1n = np.where(left, hi - g * (hi - lo), x2)
        fnew = dist(np.where(left, x1n, x2n))
        f1, f2 = np.where(left, fnew, f2), np.where(left, f1, fnew)
        x1, x2 = x1n, x2n
    best = np.minimum(np.minimum(f1, f2), np.minimum(dist(np.zeros(len(si))), dist(np.ones(len(si)))))
    out = np.full(len(A), np.inf)
    np.minimum.at(out, pi, best)
    return out


def cycle_deviation(a: Cycle, b: Cycle, fol: Foliation | None = None) -> float:
    """Symmetric Hausdorff-type distance between two cycles.

    Without a foliation the cycles are compared as polygons.  With one, the
    markers of each cycle are measured against the exact leaf arcs of the
    other (graph over each chord), so polygon sagitta does not enter.
    """
    if fol is None:
        return max(_directed_distance(a.points, b.points, b.closed),
                   _directed_distance(b.points, a.points, a.closed))
    out = 0.0
    for p, q in ((a, b), (b, a)):
        if q.logs is None:
            q = replace(q, logs=fol.principal_logs(fol.evaluate(q.points)))
        d = _arc_distance(fol, p.points, q, fol.evaluate(q.points))
        out = max(out, float(np.max(d)))
    return out


def shoelace_area(cyc: Cycle) -> float:
    x, y = cyc.points[:, 0].real, cyc.points[:, 1].real
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def cycle_length(cyc: Cycle) -> float:
    return float(np.sum(cyc.spacing()))


def point_in_polygon(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd rule for real points against a real polygon (both ``(n, 2)``)."""
    pts = np.real(np.asarray(pts))
    poly = np.real(np.asarray(poly))
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    x0, y0 = poly[:, 0][None, :], poly[:, 1][None, :]
    x1, y1 = np.roll(poly[:, 0], -1)[None, :], np.roll(poly[:, 1], -1)[None, :]
    cond = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    cross = cond & (x < xc)
    return (np.sum(cross, axis=1) % 2) == 1
