"""Darboux systems ``H = prod P_i**a_i * Q**(alpha - 1/eps) * (Q + eps R)**(1/eps)``.

The exponential case ``eps = 0`` (``H = prod P_i**a_i * Q**alpha * exp(R/Q)``)
is a separate code path everywhere: ``(Q + eps R)**(1/eps)`` is rewritten as
``Q**(1/eps) * (1 + eps R/Q)**(1/eps)`` and the second factor is evaluated
through ``log1p`` so that the limit is reached smoothly instead of through
cancellation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize

from .errors import ConfigError, DomainError, PoleError
from .polynomial import BivariatePoly, eval_poly, grad_poly

__all__ = [
    "UnfoldingParams",
    "DarbouxSystem",
    "OneForm",
    "GenericityReport",
    "triangle_system",
    "eval_poly",
    "grad_poly",
    "first_integral",
    "log_first_integral",
    "log_derivative_form",
    "integrating_factor",
    "plane_vector_field",
    "check_genericity",
]


@dataclass(frozen=True)
class UnfoldingParams:
    eps: float = 0.0
    alpha: float = 0.0

    def check(self, eps0: float = 0.5) -> "UnfoldingParams":
        if abs(self.eps) >= eps0 or abs(self.alpha) >= eps0:
            raise ConfigError(f"|eps|, |alpha| must be below {eps0}: {self}")
        return self

    def as_dict(self) -> dict:
        return {"eps": self.eps, "alpha": self.alpha}


@dataclass(frozen=True)
class DarbouxSystem:
    factors: tuple[tuple[BivariatePoly, float], ...]
    q: BivariatePoly
    r: BivariatePoly
    region: tuple[float, float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple((p, float(a)) for p, a in self.factors))
        object.__setattr__(self, "region", tuple(float(v) for v in self.region))
        for p, a in self.factors:
            if not a > 0:
                raise ConfigError(f"factor exponents must be positive, got {a}")
            if p.is_zero():
                raise ConfigError("factor polynomial is identically zero")
        if self.q.is_zero() or self.r.is_zero():
            raise ConfigError("Q and R must be nonzero polynomials")
        xmin, xmax, ymin, ymax = self.region
        if not (xmin < xmax and ymin < ymax):
            raise ConfigError(f"degenerate region {self.region}")

    @property
    def polys(self) -> list[BivariatePoly]:
        return [p for p, _ in self.factors]

    @property
    def exponents(self) -> list[float]:
        return [a for _, a in self.factors]

    def product_p(self) -> BivariatePoly:
        out = BivariatePoly.const(1.0)
        for p in self.polys:
            out = out * p
        return out

    def integrating_factor_poly(self, params: UnfoldingParams) -> BivariatePoly:
        return self.q * (self.q + params.eps * self.r) * self.product_p()

    def m_theta(self, params: UnfoldingParams) -> tuple[BivariatePoly, BivariatePoly]:
        """Polynomial one-form ``M * theta`` as ``(A, B)``.

        The ``1/eps`` terms cancel exactly against each other, leaving
        ``prod P * (Q dR - R dQ)``, which is what makes this valid at eps = 0.
        """
        eps, alpha = params.eps, params.alpha
        prod = self.product_p()
        qe = self.q + eps * self.r
        comps = []
        for var in (0, 1):
            acc = BivariatePoly()
            for i, (p, a) in enumerate(self.factors):
                others = BivariatePoly.const(1.0)
                for j, pj in enumerate(self.polys):
                    if j != i:
                        others = others * pj
                acc = acc + a * self.q * qe * others * p.partial(var)
            acc = acc + alpha * qe * prod * self.q.partial(var)
            acc = acc + prod * (self.q * self.r.partial(var) - self.r * self.q.partial(var))
            comps.append(acc)
        return comps[0], comps[1]

    def residues(self, params: UnfoldingParams) -> list[tuple[str, float]]:
        """Coefficients of ``dF/F`` in the log-derivative, per invariant curve."""
        out = [(f"P{i + 1}", a) for i, a in enumerate(self.exponents)]
        if params.eps == 0:
            out.append(("Q", params.alpha))
        else:
            out.append(("Q", params.alpha - 1.0 / params.eps))
            out.append(("Q+eps*R", 1.0 / params.eps))
        return out

    # file format
    def to_json(self) -> dict:
        return {
            "factors": [{"poly": p.to_terms(), "exponent": a} for p, a in self.factors],
            "q": self.q.to_terms(),
            "r": self.r.to_terms(),
            "region": list(self.region),
        }

    @classmethod
    def from_json(cls, data: dict) -> "DarbouxSystem":
        try:
            factors = tuple(
                (BivariatePoly.from_terms(f["poly"]), float(f["exponent"])) for f in data["factors"]
            )
            return cls(
                factors=factors,
                q=BivariatePoly.from_terms(data["q"]),
                r=BivariatePoly.from_terms(data["r"]),
                region=tuple(data["region"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed system definition: {exc}") from exc

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "DarbouxSystem":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read system file {path}: {exc}") from exc
        return cls.from_json(data)


def triangle_system() -> DarbouxSystem:
    """``x * y * exp(-1/(1 - x - y))``: the nest fills the unit triangle."""
    x, y = BivariatePoly.x(), BivariatePoly.y()
    return DarbouxSystem(
        factors=((x, 1.0), (y, 1.0)),
        q=1 - x - y,
        r=BivariatePoly.const(-1.0),
        region=(0.0, 1.0, 0.0, 1.0),
    )


@dataclass(frozen=True)
class OneForm:
    """Polynomial one-form ``A dx + B dy``."""

    a: BivariatePoly
    b: BivariatePoly

    @property
    def degree(self) -> int:
        return max(self.a.degree, self.b.degree)

    def check_degree(self, n: int) -> "OneForm":
        if self.degree > n:
            raise ConfigError(f"form degree {self.degree} exceeds configured n={n}")
        return self

    @classmethod
    def exact(cls, f: BivariatePoly, m: BivariatePoly) -> "OneForm":
        """``M dF``, whose pseudo-abelian integral vanishes identically."""
        return cls(m * f.partial(0), m * f.partial(1))

    def __add__(self, other: "OneForm") -> "OneForm":
        return OneForm(self.a + other.a, self.b + other.b)

    def __mul__(self, c: float) -> "OneForm":
        return OneForm(self.a * c, self.b * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def to_json(self) -> dict:
        return {"a": self.a.to_terms(), "b": self.b.to_terms()}

    @classmethod
    def from_json(cls, data: dict) -> "OneForm":
        return cls(BivariatePoly.from_terms(data["a"]), BivariatePoly.from_terms(data["b"]))


# --- pointwise operations ---------------------------------------------------

def _real_point(z) -> tuple[float, float]:
    x, y = z
    if np.iscomplexobj(x) and np.imag(x) != 0 or np.iscomplexobj(y) and np.imag(y) != 0:
        raise DomainError("real principal branch requires a real point", operation="first_integral")
    return float(np.real(x)), float(np.real(y))


def log_first_integral(sys: DarbouxSystem, params: UnfoldingParams, z) -> float:
    """Real ``log H`` on the principal branch; raises where a factor is nonpositive."""
    x, y = _real_point(z)
    eps, alpha = params.eps, params.alpha
    total = 0.0
    for i, (p, a) in enumerate(sys.factors):
        v = float(p(x, y))
        if not v > 0:
            raise DomainError(f"factor P{i + 1} = {v} is not positive at {z}", operation="first_integral")
        total += a * math.log(v)
    q = float(sys.q(x, y))
    r = float(sys.r(x, y))
    if not q > 0:
        raise DomainError(f"Q = {q} is not positive at {z}", operation="first_integral")
    total += alpha * math.log(q)
    if eps == 0:
        total += r / q
    else:
        e = eps * r / q
        if not e > -1:
            raise DomainError(f"Q + eps*R = {q + eps * r} is not positive at {z}", operation="first_integral")
        # the series avoids dividing by a subnormal eps
        total += r / q * (1 - e / 2 + e * e / 3) if abs(e) < 1e-8 else math.log1p(e) / eps
    return total


def first_integral(sys: DarbouxSystem, params: UnfoldingParams, z) -> float:
    """``H_{eps,alpha}(z)`` on the real principal branch.

    On a factor curve ``P_i = 0`` (with everything else admissible) the
    limit value 0 is returned.
    """
    x, y = _real_point(z)
    vals = [float(p(x, y)) for p in sys.polys]
    if any(v == 0.0 for v in vals) and all(v >= 0 for v in vals):
        q = float(sys.q(x, y))
        if q > 0 and (params.eps == 0 or q + params.eps * float(sys.r(x, y)) > 0):
            return 0.0
    return math.exp(log_first_integral(sys, params, (x, y)))


def log_derivative_form(sys: DarbouxSystem, params: UnfoldingParams, z) -> np.ndarray:
    """``theta = d log H`` at a complex point, as the covector ``(theta_x, theta_y)``."""
    x, y = np.complex128(z[0]), np.complex128(z[1])
    eps, alpha = params.eps, params.alpha
    theta = np.zeros(2, dtype=complex)
    for i, (p, a) in enumerate(sys.factors):
        v = eval_poly(p, (x, y))
        if v == 0:
            raise PoleError(f"P{i + 1} vanishes at {z}", operation="log_derivative_form")
        theta += a * np.array(grad_poly(p, (x, y))) / v
    q = eval_poly(sys.q, (x, y))
    r = eval_poly(sys.r, (x, y))
    if q == 0:
        raise PoleError(f"Q vanishes at {z}", operation="log_derivative_form")
    gq = np.array(grad_poly(sys.q, (x, y)))
    gr = np.array(grad_poly(sys.r, (x, y)))
    t = 1.0 + eps * r / q
    if t == 0:
        raise PoleError(f"Q + eps*R vanishes at {z}", operation="log_derivative_form")
    theta += alpha * gq / q + (q * gr - r * gq) / (q * q) / t
    return theta


def integrating_factor(sys: DarbouxSystem, params: UnfoldingParams, z) -> complex:
    x, y = np.complex128(z[0]), np.complex128(z[1])
    q = eval_poly(sys.q, (x, y))
    out = q * (q + params.eps * eval_poly(sys.r, (x, y)))
    for p in sys.polys:
        out *= eval_poly(p, (x, y))
    return complex(out)


def plane_vector_field(sys: DarbouxSystem, params: UnfoldingParams, z) -> np.ndarray:
    """Polynomial field ``(-B, A)`` with ``(A, B) = M theta``; its orbits lie on leaves."""
    a, b = sys.m_theta(params)
    x, y = np.complex128(z[0]), np.complex128(z[1])
    return np.array([-complex(b(x, y)), complex(a(x, y))])


# --- genericity ---------------------------------------------------------------

@dataclass
class GenericityReport:
    passed: bool
    intersections: list[dict] = field(default_factory=list)
    smoothness: list[dict] = field(default_factory=list)
    violations: list[dict] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "intersections": self.intersections,
            "smoothness": self.smoothness,
            "violations": self.violations,
        }


def _curve_samples(p: BivariatePoly, region, n: int = 60) -> np.ndarray:
    """Points of ``{p = 0}`` on the horizontal and vertical lines of an n-grid."""
    xmin, xmax, ymin, ymax = region
    xs = np.linspace(xmin, xmax, n)
    ys = np.linspace(ymin, ymax, n)
    pts = []
    for axis, fixed_vals, run in ((0, ys, xs), (1, xs, ys)):
        for c in fixed_vals:
            if axis == 0:
                f = lambda s: float(p(s, c))
            else:
                f = lambda s: float(p(c, s))
            vals = np.array([f(s) for s in run])
            for i in range(len(run) - 1):
                if vals[i] == 0.0:
                    root = run[i]
                elif vals[i] * vals[i + 1] < 0:
                    root = optimize.brentq(f, run[i], run[i + 1], xtol=1e-14)
                else:
                    continue
                pts.append((root, c) if axis == 0 else (c, root))
    return np.array(pts).reshape(-1, 2)


def _newton_pair(p1, p2, seed, tol=1e-13, maxiter=60):
    z = np.array(seed, dtype=float)
    g1 = (p1.partial(0), p1.partial(1))
    g2 = (p2.partial(0), p2.partial(1))
    for _ in range(maxiter):
        f = np.array([p1(*z), p2(*z)], dtype=float)
        if np.max(np.abs(f)) < tol:
            return z
        J = np.array([[g1[0](*z), g1[1](*z)], [g2[0](*z), g2[1](*z)]], dtype=float)
        try:
            step = np.linalg.lstsq(J, f, rcond=None)[0]
        except np.linalg.LinAlgError:
            return None
        z = z - step
        if not np.all(np.isfinite(z)):
            return None
    f = np.array([p1(*z), p2(*z)], dtype=float)
    return z if np.max(np.abs(f)) < 1e-9 else None


def _intersections(p1, p2, region, n_seed: int = 12) -> list[np.ndarray]:
    xmin, xmax, ymin, ymax = region
    found: list[np.ndarray] = []
    for sx in np.linspace(xmin, xmax, n_seed):
        for sy in np.linspace(ymin, ymax, n_seed):
            z = _newton_pair(p1, p2, (sx, sy))
            if z is None:
                continue
            if not (xmin - 1e-9 <= z[0] <= xmax + 1e-9 and ymin - 1e-9 <= z[1] <= ymax + 1e-9):
                continue
            if all(np.hypot(*(z - w)) > 1e-6 for w in found):
                found.append(z)
    return sorted(found, key=lambda v: (round(v[0], 9), round(v[1], 9)))


def check_genericity(
    sys: DarbouxSystem,
    region=None,
    *,
    transversality_tol: float = 1e-6,
    gradient_tol: float = 1e-6,
    pad: float = 0.05,
) -> GenericityReport:
    """Sampled check of smoothness, pairwise transversality and ``R = Q = 0`` emptiness.

    The search region is the system region padded by ``pad`` of its size so
    that corner intersections on the boundary are found.
    """
    xmin, xmax, ymin, ymax = region if region is not None else sys.region
    dx, dy = pad * (xmax - xmin), pad * (ymax - ymin)
    box = (xmin - dx, xmax + dx, ymin - dy, ymax + dy)
    curves = [(f"P{i + 1}", p) for i, p in enumerate(sys.polys)] + [("Q", sys.q)]
    report = GenericityReport(passed=True)

    for name, p in curves:
        pts = _curve_samples(p, box)
        if len(pts) == 0:
            report.smoothness.append({"curve": name, "samples": 0, "min_grad": None})
            continue
        g = np.hypot(p.partial(0)(pts[:, 0], pts[:, 1]), p.partial(1)(pts[:, 0], pts[:, 1]))
        i = int(np.argmin(g))
        report.smoothness.append({"curve": name, "samples": int(len(pts)), "min_grad": float(g[i])})
        if g[i] <= gradient_tol:
            report.passed = False
            report.violations.append(
                {"kind": "singular-curve", "curve": name, "point": pts[i].tolist(), "grad_norm": float(g[i])}
            )

    for a in range(len(curves)):
        for b in range(a + 1, len(curves)):
            (na, pa), (nb, pb) = curves[a], curves[b]
            for z in _intersections(pa, pb, box):
                det = float(
                    pa.partial(0)(*z) * pb.partial(1)(*z) - pa.partial(1)(*z) * pb.partial(0)(*z)
                )
                entry = {"curves": [na, nb], "point": z.tolist(), "det": det}
                report.intersections.append(entry)
                if abs(det) <= transversality_tol:
                    report.passed = False
                    report.violations.append({"kind": "non-transversal", **entry})

    # R = 0 and Q = 0 must not meet inside the region
    qpts = _curve_samples(sys.q, box)
    bad = []
    if len(qpts):
        rv = np.abs(sys.r(qpts[:, 0], qpts[:, 1]))
        rg = np.hypot(sys.r.partial(0)(qpts[:, 0], qpts[:, 1]), sys.r.partial(1)(qpts[:, 0], qpts[:, 1]))
        scale = np.maximum(rg, 1.0)
        bad = [qpts[i].tolist() for i in np.flatnonzero(rv / scale < 1e-9)]
    for z in _intersections(sys.r, sys.q, box):
        bad.append(z.tolist())
    if bad:
        report.passed = False
        report.violations.append({"kind": "R-Q-intersection", "points": bad[:20], "count": len(bad)})
    return report
