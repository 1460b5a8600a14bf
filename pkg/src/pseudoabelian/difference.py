"""Calculus in the log chart ``u = log h``.

Continuation ``h -> h e^{+-i a pi}`` becomes the shift ``u -> u +- i a pi``,
so variations become difference operators

    Delta_a f(u) = f(u + i a pi) - f(u - i a pi).

This module provides the algebra ``C[u, 1/u, log u]`` (:class:`LogChartPoly`)
with exact integration, asymptotic solution of ``Delta_a F = p`` inside that
algebra, and the lattice-sum solutions ``F_+-`` of
``Delta_{a_1..a_k} F = f`` on the quarter planes
``Q_+ = {Re u < -L, Im u > -K}`` and ``Q_- = {Re u < -L, Im u < K}``.

Branch of ``log u``: ``arg u`` in ``(0, 2 pi)``, i.e. ``log u = log(-u) + i pi``;
this is holomorphic on the whole left half plane.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DecayAssumptionViolated,
    Divergence,
    DomainViolation,
    InsufficientExpansionOrder,
)

__all__ = [
    "GaussRational",
    "LogChartPoly",
    "HalfPlaneFn",
    "log_u",
    "delta",
    "delta_iter",
    "integrate_logchart",
    "differentiate_logchart",
    "principal_part",
    "solve_delta_leading",
    "solve_delta",
    "delta_expansion",
    "iterated_sum",
    "IteratedSum",
    "cochain_difference",
    "ray",
    "fit_decay_exponent",
    "estimate_decay",
]

DEFAULT_L = 5.0
DEFAULT_K = 10.0


def log_u(u):
    """``log u`` with ``arg u`` in ``(0, 2 pi)``."""
    return np.log(-np.asarray(u, dtype=complex)) + 1j * np.pi


# --- exact coefficients --------------------------------------------------------------

class GaussRational:
    """Exact ``p + q i`` with rational ``p``, ``q``."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @staticmethod
    def lift(x):
        if isinstance(x, GaussRational):
            return x
        if isinstance(x, Rational):
            return GaussRational(x, 0)
        return None

    def __add__(self, o):
        g = GaussRational.lift(o)
        if g is None:
            return complex(self) + o
        return GaussRational(self.re + g.re, self.im + g.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussRational(-self.re, -self.im)

    def __sub__(self, o):
        return self + (-o)

    def __rsub__(self, o):
        return (-self) + o

    def __mul__(self, o):
        g = GaussRational.lift(o)
        if g is None:
            return complex(self) * o
        return GaussRational(self.re * g.re - self.im * g.im, self.re * g.im + self.im * g.re)

    __rmul__ = __mul__

    def __truediv__(self, o):
        g = GaussRational.lift(o)
        if g is None:
            return complex(self) / o
        d = g.re * g.re + g.im * g.im
        return GaussRational((self.re * g.re + self.im * g.im) / d, (self.im * g.re - self.re * g.im) / d)

    def __eq__(self, o):
        g = GaussRational.lift(o)
        if g is None:
            return complex(self) == o
        return self.re == g.re and self.im == g.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"GaussRational({self.re}, {self.im})"


def _is_zero(c) -> bool:
    return not c if not isinstance(c, float | complex) else c == 0


def _exact(c) -> bool:
    return isinstance(c, (GaussRational, Rational))


# --- the algebra C[u, 1/u, log u] ------------------------------------------------------

class LogChartPoly:
    """Finite sum ``sum c[l, m] u**l (log u)**m`` with ``l`` in Z, ``m >= 0``.

    Coefficients may be ints, :class:`fractions.Fraction`,
    :class:`GaussRational` (all exact) or Python complex numbers.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: dict | None = None):
        out = {}
        for (l, m), c in (coeffs or {}).items():
            l, m = int(l), int(m)
            if m < 0:
                raise ValueError("powers of log u must be nonnegative")
            if not _is_zero(c):
                out[(l, m)] = c
        self.coeffs = out

    @classmethod
    def monomial(cls, l: int, m: int = 0, c=1) -> "LogChartPoly":
        return cls({(l, m): c})

    @classmethod
    def zero(cls) -> "LogChartPoly":
        return cls()

    def is_zero(self) -> bool:
        return not self.coeffs

    def is_exact(self) -> bool:
        return all(_exact(c) for c in self.coeffs.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, LogChartPoly):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(frozenset(self.coeffs.items()))

    def __repr__(self):
        terms = " + ".join(f"({c})*u^{l}*log^{m}" for (l, m), c in sorted(self.coeffs.items()))
        return f"LogChartPoly({terms or '0'})"

    def __add__(self, other: "LogChartPoly") -> "LogChartPoly":
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out[k] + c if k in out else c
        return LogChartPoly(out)

    def __neg__(self) -> "LogChartPoly":
        return LogChartPoly({k: -c for k, c in self.coeffs.items()})

    def __sub__(self, other: "LogChartPoly") -> "LogChartPoly":
        return self + (-other)

    def scale(self, s) -> "LogChartPoly":
        return LogChartPoly({k: c * s for k, c in self.coeffs.items()})

    def __mul__(self, other):
        if not isinstance(other, LogChartPoly):
            return self.scale(other)
        out: dict = {}
        for (l1, m1), c1 in self.coeffs.items():
            for (l2, m2), c2 in other.coeffs.items():
                k = (l1 + l2, m1 + m2)
                out[k] = out[k] + c1 * c2 if k in out else c1 * c2
        return LogChartPoly(out)

    __rmul__ = scale

    def order(self) -> float:
        """Decay order: the smallest ``-l`` over the terms (``inf`` for 0)."""
        return min((-l for l, _ in self.coeffs), default=math.inf)

    def leading(self) -> "LogChartPoly":
        """Terms of the slowest decay (largest ``l``)."""
        if self.is_zero():
            return self
        lmax = max(l for l, _ in self.coeffs)
        return LogChartPoly({k: c for k, c in self.coeffs.items() if k[0] == lmax})

    def truncate(self, max_order: float) -> "LogChartPoly":
        """Keep the terms ``u**l log**m`` with ``-l <= max_order``."""
        return LogChartPoly({k: c for k, c in self.coeffs.items() if -k[0] <= max_order})

    def to_complex(self) -> "LogChartPoly":
        return LogChartPoly({k: complex(c) for k, c in self.coeffs.items()})

    def __call__(self, u):
        u = np.asarray(u, dtype=complex)
        lg = log_u(u)
        out = np.zeros_like(u)
        for (l, m), c in self.coeffs.items():
            out = out + complex(c) * u ** l * lg ** m
        return out

    def derivative(self) -> "LogChartPoly":
        return differentiate_logchart(self)

    def integral(self) -> "LogChartPoly":
        return integrate_logchart(self)

    def to_json(self) -> str:
        rows = [[l, m, complex(c).real, complex(c).imag] for (l, m), c in sorted(self.coeffs.items())]
        return json.dumps(rows)

    @classmethod
    def from_json(cls, text: str) -> "LogChartPoly":
        rows = json.loads(text)
        return cls({(int(l), int(m)): complex(re, im) for l, m, re, im in rows})


def differentiate_logchart(p: LogChartPoly) -> LogChartPoly:
    """``(u**l log**m u)' = l u**(l-1) log**m u + m u**(l-1) log**(m-1) u``."""
    out = LogChartPoly()
    for (l, m), c in p.coeffs.items():
        terms = {}
        if l != 0:
            terms[(l - 1, m)] = c * l
        if m != 0:
            terms[(l - 1, m - 1)] = c * m
        out = out + LogChartPoly(terms)
    return out


def _integrate_monomial(l: int, m: int) -> dict:
    """Antiderivative of ``u**l log**m u`` as a coefficient map (exact rationals)."""
    if l == -1:
        return {(0, m + 1): Fraction(1, m + 1)}
    # u^l log^m = (u^{l+1} log^m)'/(l+1) - m/(l+1) u^l log^{m-1}: descend in m
    out: dict = {}
    coef = Fraction(1)
    k = l + 1
    for j in range(m, -1, -1):
        out[(k, j)] = out.get((k, j), 0) + coef / k
        coef = -coef * j / k
    return out


def integrate_logchart(p: LogChartPoly) -> LogChartPoly:
    """``P`` in ``C[u, 1/u, log u]`` with ``P' = p`` and no constant term."""
    out = LogChartPoly()
    for (l, m), c in p.coeffs.items():
        out = out + LogChartPoly({k: c * v for k, v in _integrate_monomial(l, m).items()})
    return out


# --- functions on half planes ------------------------------------------------------------

@dataclass
class HalfPlaneFn:
    """A function on ``{Re u < -L}`` with an optional declared bound ``|f| <= M |u|**(-A)``."""

    evaluator: Callable
    L: float = DEFAULT_L
    A: float | None = None
    M: float = 1.0
    name: str = "f"

    def __call__(self, u):
        return self.evaluator(u)

    def in_domain(self, u) -> bool:
        return bool(np.all(np.real(u) < -self.L))

    @classmethod
    def power(cls, n: float, c: complex = 1.0, L: float = DEFAULT_L) -> "HalfPlaneFn":
        """``c u**(-n)``."""
        return cls(lambda u: c * np.asarray(u, dtype=complex) ** (-n), L, float(n), abs(c), f"u^-{n}")

    @classmethod
    def from_poly(cls, p: LogChartPoly, L: float = DEFAULT_L) -> "HalfPlaneFn":
        return cls(p, L, None, 1.0, "poly")


def delta(f, u, a: float, *, L: float | None = None):
    """``Delta_a f(u) = f(u + i a pi) - f(u - i a pi)``."""
    u = np.asarray(u, dtype=complex)
    lim = L if L is not None else getattr(f, "L", None)
    if lim is not None and not np.all(u.real < -lim):
        raise DomainViolation(f"shifted points leave Re u < -{lim}", operation="delta")
    s = 1j * a * np.pi
    return f(u + s) - f(u - s)


def delta_iter(f, u, residues: Sequence[float], *, L: float | None = None):
    """``Delta_{a_1} ... Delta_{a_k} f`` by expanding into ``2**k`` signed shifts."""
    u = np.asarray(u, dtype=complex)
    lim = L if L is not None else getattr(f, "L", None)
    if lim is not None and not np.all(u.real < -lim):
        raise DomainViolation(f"shifted points leave Re u < -{lim}", operation="delta_iter")
    out = np.zeros_like(u)
    for signs in itertools.product((1, -1), repeat=len(residues)):
        shift = 1j * np.pi * sum(s * a for s, a in zip(signs, residues))
        out = out + int(np.prod(signs)) * f(u + shift)
    return out


# --- asymptotic solution inside the algebra ------------------------------------------------

def principal_part(coeffs: dict, A: float, *, order: float | None = None, f: Callable | None = None,
                   ray_sign: int = 1, K: float = DEFAULT_K, t_range=(10.0, 1e4), n: int = 60):
    """Terms ``a[m, l] log**m u / u**(m + l)`` with ``m + l <= A + 1``.

    ``coeffs`` maps ``(m, l)`` to ``a[m, l]``; ``order`` is the largest
    ``m + l`` up to which the expansion is known and must exceed
    ``A + 1``; by default ``coeffs`` is taken to be the complete expansion.  With ``f``, returns also the sampled
    ``M = max |f - p| |u|**A`` along ``u = -t + i ray_sign K/2``.
    """
    avail = math.inf if order is None else order
    if not avail > A + 1:
        raise InsufficientExpansionOrder(
            f"expansion known to order {avail}, need more than {A + 1}", operation="principal_part")
    p = LogChartPoly({(-(m + l), m): c for (m, l), c in coeffs.items() if m + l <= A + 1})
    if f is None:
        return p, None
    us = ray(np.geomspace(*t_range, n), ray_sign, K)
    M = float(np.max(np.abs(f(us) - p(us)) * np.abs(us) ** A))
    return p, M


def solve_delta_leading(p: LogChartPoly, a: float, *, check: bool = True, ray_sign: int = 1,
                        K: float = DEFAULT_K, t_range=(10.0, 1e4)) -> LogChartPoly:
    """``P / (2 pi i a)`` with ``P' = p``: the leading part of the solution of ``Delta_a F = p``.

    The residual ``p - Delta_a(P / (2 pi i a))`` decays at least one order
    faster than ``p``; with ``check`` this is verified by a log-log fit
    along a ray and :class:`DecayAssumptionViolated` is raised otherwise.
    """
    if p.is_zero():
        return LogChartPoly()
    if a <= 0:
        raise ValueError("residue must be positive")
    P = integrate_logchart(p)
    q = P.to_complex().scale(1 / (2j * math.pi * a))
    if check:
        ts = np.geomspace(*t_range, 40)
        us = ray(ts, ray_sign, K)
        A = fit_decay_exponent(np.abs(p(us)), ts)
        res = np.abs(p(us) - delta(q, us, a))
        if np.all(res <= 1e-15 * np.abs(p(us))):
            return q
        B = fit_decay_exponent(res, ts)
        if B < A + 1 - 0.1:
            raise DecayAssumptionViolated(
                f"residual decays like |u|^-{B:.3g}, expected at least {A + 1:.3g}",
                operation="solve_delta_leading", data={"A": A, "B": B})
    return q


def _binom_series(l: int, n: int):
    """Coefficients of ``(1 + x)**l`` up to ``x**n`` (``l`` any integer)."""
    out = [Fraction(1)]
    for j in range(1, n + 1):
        out.append(out[-1] * (l - j + 1) / j)
    return out


def delta_expansion(p: LogChartPoly, a: float, max_order: float) -> LogChartPoly:
    """Asymptotic expansion of ``Delta_a p`` in ``C[u, 1/u, log u]`` up to decay order ``max_order``.

    Uses ``(u + c)**l = u**l sum_j binom(l, j) (c/u)**j`` and
    ``log(u + c) = log u + log1p(c/u)``; terms with ``-l > max_order`` are
    dropped.
    """
    out = LogChartPoly()
    for sgn in (1, -1):
        c = sgn * 1j * a * math.pi
        for (l, m), coef in p.coeffs.items():
            n = int(math.floor(max_order + l)) + 1
            if n < 0:
                continue
            # (c/u)-series of log1p(c/u)
            L1 = {j: (-1) ** (j + 1) * c ** j / j for j in range(1, n + 1)}
            # (log u + L1)^m = sum_i binom(m, i) log^{m-i} u * L1^i
            pow_series = [{0: 1.0 + 0j}]
            for _ in range(m):
                prev = pow_series[-1]
                nxt: dict = {}
                for j1, v1 in prev.items():
                    for j2, v2 in L1.items():
                        if j1 + j2 <= n:
                            nxt[j1 + j2] = nxt.get(j1 + j2, 0) + v1 * v2
                pow_series.append(nxt)
            binl = _binom_series(l, n)
            terms: dict = {}
            for i in range(m + 1):
                bm = math.comb(m, i)
                for j1, v1 in pow_series[i].items():
                    for j2 in range(0, n + 1 - j1):
                        k = (l - j1 - j2, m - i)
                        val = complex(coef) * bm * v1 * float(binl[j2]) * c ** j2
                        terms[k] = terms.get(k, 0) + sgn * val
            out = out + LogChartPoly(terms)
    # drop cancellation noise
    scale = max((abs(complex(v)) for v in out.coeffs.values()), default=0.0)
    return LogChartPoly({k: v for k, v in out.coeffs.items() if abs(v) > 1e-14 * scale and -k[0] <= max_order})


def solve_delta(p: LogChartPoly, residues: Sequence[float], A: float, *, max_iter: int = 60) -> LogChartPoly:
    """``P_f`` in ``C[u, 1/u, log u]`` with ``p - Delta_{a_1..a_k} P_f = O(|u|**(-A))``.

    Repeatedly solves for the leading part of the residual (one residue at
    a time) and re-expands ``Delta`` asymptotically; each pass removes the
    slowest-decaying residual terms.
    """
    P = LogChartPoly()
    residues = list(residues)
    target = p.to_complex()
    # float cancellation leaves residual terms at round-off level
    floor = 1e-12 * max((abs(c) for c in target.coeffs.values()), default=0.0)
    for _ in range(max_iter):
        r = target - _delta_iter_expansion(P, residues, A + 1)
        r = LogChartPoly({k: c for k, c in r.truncate(A).coeffs.items() if abs(c) > floor})
        if r.is_zero():
            return P
        lead = r.leading()
        q = lead
        for a in residues:
            q = solve_delta_leading(q, a, check=False)
        P = P + q
    raise InsufficientExpansionOrder(f"no convergence to order {A} after {max_iter} passes",
                                     operation="solve_delta")


def _delta_iter_expansion(P: LogChartPoly, residues, max_order):
    q = P
    for a in residues:
        q = delta_expansion(q, a, max_order + len(residues))
    return q.truncate(max_order)


# --- lattice-sum solutions -----------------------------------------------------------------

def ray(t, sign: int = 1, K: float = DEFAULT_K):
    """``u = -t + i sign K/2``."""
    return -np.asarray(t, dtype=float) + 1j * sign * K / 2


def fit_decay_exponent(values, t) -> float:
    """``B`` in ``|values| ~ C t**(-B)`` by least squares in log-log."""
    v = np.abs(np.asarray(values))
    t = np.asarray(t, dtype=float)
    ok = v > 0
    slope = np.polyfit(np.log(t[ok]), np.log(v[ok]), 1)[0]
    return float(-slope)


def estimate_decay(f: Callable, u: complex, direction: int = 1, *, n: int = 12) -> float:
    """Decay exponent of ``|f(u + i direction y)|`` for ``y`` from ``10`` to ``1e6``."""
    ys = np.geomspace(10.0, 1e6, n)
    with np.errstate(all="ignore"):
        vals = np.abs(f(u + 1j * direction * ys))
    if not np.all(np.isfinite(vals)) or np.any(vals == 0):
        return math.inf if np.all(vals == 0) else -math.inf
    return fit_decay_exponent(vals, ys)


@dataclass
class IteratedSum:
    value: complex
    caps: list  # index caps
    tail_bound: float
    terms: int
    details: dict = field(default_factory=dict)


def _tail_rule(N: int, panels: int = 24, nodes: int = 16):
    """Nodes ``x`` and weights ``w`` with ``sum_w g(x) ~ sum_{m > N} g(m)``.

    Midpoint form of the Euler-Maclaurin formula:
    ``sum_{m > N} g(m) = int_{N+1/2}^inf g + (g(N+1) - g(N)) / 24 + ...``.
    The integral is mapped to ``s = (N + 1/2) / x`` in ``(0, 1]`` and
    integrated by Gauss-Legendre on geometrically graded panels, which
    resolves the transition of ``g`` from its near-field to its power tail.
    """
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    edges = np.concatenate([[0.0], np.geomspace(2.0 ** -(panels - 1), 1.0, panels)])
    xs, ws = [], []
    c = N + 0.5
    for lo, hi in zip(edges[:-1], edges[1:]):
        sn = 0.5 * (hi + lo) + 0.5 * (hi - lo) * gx
        xs.append(c / sn)
        ws.append(0.5 * (hi - lo) * gw * c / sn ** 2)
    x = np.concatenate(xs + [[N + 1.0, float(N)]])
    w = np.concatenate(ws + [[1.0 / 24, -1.0 / 24]])
    return x, w


def _lattice_rule(N: int):
    x_t, w_t = _tail_rule(N)
    x = np.concatenate([np.arange(1, N + 1, dtype=float), x_t])
    w = np.concatenate([np.ones(N), w_t])
    return x, w


def _tail_bound(M, A, y_n, a, depth):
    """Integral comparison bound for the terms beyond shift ``y_n`` of one index.

    The summand is bounded by ``M |shift|**-(A - depth)``, ``depth`` being
    the number of indices summed inside it.
    """
    e = A - depth
    if y_n <= 0 or e <= 1:
        return math.inf
    return M * y_n ** (1 - e) / ((e - 1) * 2 * math.pi * a)


def iterated_sum(f, residues: Sequence[float], sign: int, u, *, A: float | None = None, M: float | None = None,
                 N: int = 128, L: float | None = None, K: float = DEFAULT_K) -> IteratedSum:
    """``F_+-(u) = (-+1)**k sum_{m_j >= 1} f(u +- 2 pi i sum a_j m_j -+ pi i sum a_j)``.

    ``sign`` is ``+1`` for ``F_+`` (``u`` in ``Q_+``) and ``-1`` for ``F_-``.
    Every index is summed explicitly up to ``N`` and the remainder is
    replaced by its Euler-Maclaurin (midpoint) integral; ``tail_bound`` is
    the integral comparison bound of that remainder before correction and
    ``correction_change`` the effect of doubling ``N``.
    """
    residues = [float(a) for a in residues]
    k = len(residues)
    if k < 1 or any(a <= 0 for a in residues):
        raise ValueError("residues must be positive")
    A = A if A is not None else getattr(f, "A", None)
    M = M if M is not None else getattr(f, "M", 1.0)
    if A is None:
        raise ValueError("a decay exponent A with |f| <= M |u|^-A is required")
    if not A > k:
        raise Divergence(f"lattice sum diverges: decay exponent {A} <= depth {k}", operation="iterated_sum")
    u = complex(u)
    lim = L if L is not None else getattr(f, "L", DEFAULT_L)
    if not u.real < -lim or not sign * u.imag > -K:
        raise DomainViolation(f"u={u} is outside the quarter plane Q_{'+' if sign > 0 else '-'}",
                              operation="iterated_sum")

    def total(n):
        x, w = _lattice_rule(n)
        U = np.array([u - sign * 1j * math.pi * sum(residues)])
        W = np.ones(1)
        for a in residues:
            U = (U[:, None] + sign * 2j * math.pi * a * x[None, :]).ravel()
            W = (W[:, None] * w[None, :]).ravel()
        vals = f(U)
        order = np.argsort(np.abs(vals), kind="stable")
        return complex(np.sum((W * vals)[order]))

    val = total(N)
    change = abs(total(2 * N) - val) if k == 1 else math.nan
    y_n = sign * u.imag + 2 * math.pi * min(residues) * (N + 0.5) - math.pi * sum(residues)
    tail = max(_tail_bound(M, A, y_n, a, k - 1 - j) for j, a in enumerate(residues))
    return IteratedSum(complex((-sign) ** k * val), [N] * k, tail, (N + 24 * 16 + 2) ** k,
                       {"correction_change": change})


def cochain_difference(f, a: float, u, *, N: int = 512) -> complex:
    """Bilateral sum ``sum_{m in Z} f(u + i pi a + 2 pi i a m)`` (equal to ``F_- - F_+`` for one residue).

    Both half-sums use the same lattice rule as :func:`iterated_sum`.
    Requires decay faster than ``|Im u|**-1`` in both vertical directions;
    otherwise :class:`Divergence` is raised.
    """
    u = complex(u)
    for d in (1, -1):
        B = estimate_decay(f, u, d)
        if not B > 1:
            raise Divergence(f"f decays like |Im u|^-{B:.3g} in direction {d:+d}; the bilateral sum diverges",
                             operation="cochain_difference")
    x, w = _lattice_rule(N)
    c = u + 1j * math.pi * a
    vals = np.concatenate([f(np.array([c])), f(c + 2j * math.pi * a * x), f(c - 2j * math.pi * a * x)])
    ws = np.concatenate([[1.0], w, w])
    order = np.argsort(np.abs(vals), kind="stable")
    return complex(np.sum((ws * vals)[order]))
