"""Sparse bivariate polynomials with real coefficients."""

from __future__ import annotations

from typing import Iterable, Mapping

import numpy as np

__all__ = ["BivariatePoly", "PolyStack", "eval_poly", "grad_poly"]


class BivariatePoly:
    """Immutable sparse polynomial ``sum c[j, k] x**j y**k``.

    Zero coefficients are dropped on construction, so ``coeffs`` never
    stores a zero and ``degree`` is the largest total degree present
    (``-1`` for the zero polynomial).
    """

    __slots__ = ("_coeffs", "_jx", "_jy", "_c", "_hash")

    def __init__(self, coeffs: Mapping[tuple[int, int], float] | None = None):
        clean: dict[tuple[int, int], float] = {}
        for (j, k), c in (coeffs or {}).items():
            j, k = int(j), int(k)
            if j < 0 or k < 0:
                raise ValueError(f"negative exponent in monomial {(j, k)}")
            c = float(c)
            if c != 0.0:
                clean[(j, k)] = clean.get((j, k), 0.0) + c
                if clean[(j, k)] == 0.0:
                    del clean[(j, k)]
        self._coeffs = dict(sorted(clean.items()))
        keys = list(self._coeffs)
        self._jx = np.array([j for j, _ in keys], dtype=int)
        self._jy = np.array([k for _, k in keys], dtype=int)
        self._c = np.array(list(self._coeffs.values()), dtype=float)
        self._hash = None

    # construction helpers
    @classmethod
    def from_terms(cls, terms: Iterable[Iterable[float]]) -> "BivariatePoly":
        out: dict[tuple[int, int], float] = {}
        for j, k, c in terms:
            if int(j) != j or int(k) != k:
                raise ValueError(f"non-integer exponent in term {(j, k, c)}")
            key = (int(j), int(k))
            out[key] = out.get(key, 0.0) + float(c)
        return cls(out)

    @classmethod
    def const(cls, c: float) -> "BivariatePoly":
        return cls({(0, 0): c})

    @classmethod
    def x(cls) -> "BivariatePoly":
        return cls({(1, 0): 1.0})

    @classmethod
    def y(cls) -> "BivariatePoly":
        return cls({(0, 1): 1.0})

    def to_terms(self) -> list[list]:
        return [[j, k, c] for (j, k), c in self._coeffs.items()]

    @property
    def coeffs(self) -> dict[tuple[int, int], float]:
        return dict(self._coeffs)

    @property
    def degree(self) -> int:
        if not self._coeffs:
            return -1
        return int(max(j + k for j, k in self._coeffs))

    def is_zero(self) -> bool:
        return not self._coeffs

    # arithmetic
    def __add__(self, other):
        other = _coerce(other)
        out = dict(self._coeffs)
        for key, c in other._coeffs.items():
            out[key] = out.get(key, 0.0) + c
        return BivariatePoly(out)

    __radd__ = __add__

    def __neg__(self):
        return BivariatePoly({key: -c for key, c in self._coeffs.items()})

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        other = _coerce(other)
        out: dict[tuple[int, int], float] = {}
        for (j1, k1), c1 in self._coeffs.items():
            for (j2, k2), c2 in other._coeffs.items():
                key = (j1 + j2, k1 + k2)
                out[key] = out.get(key, 0.0) + c1 * c2
        return BivariatePoly(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if int(n) != n or n < 0:
            raise ValueError("only nonnegative integer powers")
        out = BivariatePoly.const(1.0)
        for _ in range(int(n)):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, BivariatePoly):
            return NotImplemented
        return self._coeffs == other._coeffs

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(tuple(self._coeffs.items()))
        return self._hash

    def __repr__(self):
        if not self._coeffs:
            return "BivariatePoly(0)"
        parts = []
        for (j, k), c in self._coeffs.items():
            mono = "*".join(
                s for s in (
                    "x" if j == 1 else (f"x^{j}" if j else ""),
                    "y" if k == 1 else (f"y^{k}" if k else ""),
                ) if s
            )
            parts.append(f"{c!r}*{mono}" if mono else repr(c))
        return "BivariatePoly(" + " + ".join(parts) + ")"

    def partial(self, var: int) -> "BivariatePoly":
        """Exact derivative; ``var`` is 0 for x and 1 for y."""
        out = {}
        for (j, k), c in self._coeffs.items():
            if var == 0 and j:
                out[(j - 1, k)] = c * j
            elif var == 1 and k:
                out[(j, k - 1)] = c * k
        return BivariatePoly(out)

    def __call__(self, x, y):
        x = np.asarray(x)
        y = np.asarray(y)
        if not self._coeffs:
            return np.zeros(np.broadcast(x, y).shape, dtype=np.result_type(x, y, float))
        xs = x[..., None] ** self._jx
        ys = y[..., None] ** self._jy
        return (self._c * xs * ys).sum(axis=-1)


def _coerce(p) -> BivariatePoly:
    if isinstance(p, BivariatePoly):
        return p
    return BivariatePoly.const(float(p))


class PolyStack:
    """Evaluate several polynomials and their gradients on a shared monomial basis.

    The hot loops of the tracer and the transport call this once per
    step, so all powers are built from one table of ``x**j`` and ``y**k``.
    """

    def __init__(self, polys: Iterable[BivariatePoly]):
        polys = list(polys)
        self.polys = polys
        monos = sorted({m for p in polys for q in (p, p.partial(0), p.partial(1)) for m in q.coeffs})
        if not monos:
            monos = [(0, 0)]
        self._jx = np.array([m[0] for m in monos], dtype=int)
        self._jy = np.array([m[1] for m in monos], dtype=int)
        self._deg_x = int(self._jx.max())
        self._deg_y = int(self._jy.max())
        index = {m: i for i, m in enumerate(monos)}
        nm = len(monos)
        C = np.zeros((len(polys), nm))
        Cx = np.zeros((len(polys), nm))
        Cy = np.zeros((len(polys), nm))
        for i, p in enumerate(polys):
            for (j, k), c in p.coeffs.items():
                C[i, index[(j, k)]] = c
            for (j, k), c in p.partial(0).coeffs.items():
                Cx[i, index[(j, k)]] = c
            for (j, k), c in p.partial(1).coeffs.items():
                Cy[i, index[(j, k)]] = c
        self._C = C
        self._CD = np.vstack([C, Cx, Cy])
        self.n = len(polys)

    def _monomials(self, x, y):
        x = np.asarray(x)
        y = np.asarray(y)
        px = np.empty(x.shape + (self._deg_x + 1,), dtype=x.dtype if x.dtype.kind == "c" else float)
        py = np.empty(y.shape + (self._deg_y + 1,), dtype=y.dtype if y.dtype.kind == "c" else float)
        px[..., 0] = 1.0
        py[..., 0] = 1.0
        for j in range(1, self._deg_x + 1):
            px[..., j] = px[..., j - 1] * x
        for k in range(1, self._deg_y + 1):
            py[..., k] = py[..., k - 1] * y
        return px[..., self._jx] * py[..., self._jy]

    def values(self, x, y):
        """Array of shape ``(n_polys,) + x.shape``."""
        mono = self._monomials(x, y)
        return np.moveaxis(mono @ self._C.T, -1, 0)

    def values_and_grads(self, x, y):
        """``(values, d/dx, d/dy)``, each of shape ``(n_polys,) + x.shape``."""
        mono = self._monomials(x, y)
        out = np.moveaxis(mono @ self._CD.T, -1, 0)
        n = self.n
        return out[:n], out[n:2 * n], out[2 * n:]


def eval_poly(p: BivariatePoly, z) -> complex:
    """Value of ``p`` at the (possibly complex) point ``z = (x, y)``."""
    x, y = z
    return complex(p(np.complex128(x), np.complex128(y)))


def grad_poly(p: BivariatePoly, z) -> tuple[complex, complex]:
    x, y = np.complex128(z[0]), np.complex128(z[1])
    return complex(p.partial(0)(x, y)), complex(p.partial(1)(x, y))
