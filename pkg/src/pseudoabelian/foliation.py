"""Branch-tracked logarithmic first integrals.

A foliation here is given by a closed log-form

    log H = sum_i c_i log f_i + log1p(s g) / s

with "plain" factors ``f_i`` and at most one "near-one" factor
``1 + s g`` whose contribution tends to ``g`` as ``s -> 0``.  Complex level
sets are multivalued, so every marker carries its own branch of each
logarithm; branches are moved between nearby points through the principal
logarithm of the *ratio* of factor values, which is unambiguous as long as
that ratio stays away from the negative real axis.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .darboux import DarbouxSystem, UnfoldingParams
from .polynomial import PolyStack

__all__ = [
    "FoliationState",
    "Foliation",
    "DarbouxFoliation",
    "darboux_foliation",
    "clog1p",
    "log1p_over",
]

# largest phase a factor ratio may have across one step before the branch
# update is considered ambiguous
MAX_RATIO_ARG = np.pi / 2


def clog1p(z):
    """``log(1 + z)`` accurate for small complex ``z``."""
    z = np.asarray(z, dtype=complex)
    w = 1.0 + z
    d = w - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(d == 0, z, np.log(w) * (z / np.where(d == 0, 1.0, d)))
    return out


def log1p_over(e: float, z):
    """``log1p(e z) / e`` with the ``e -> 0`` limit ``z``; a series is used for tiny ``e z``."""
    z = np.asarray(z, dtype=complex)
    if e == 0:
        return z
    ez = e * z
    # ``e z`` loses all precision when ``e`` is subnormal, so divide only where it is large
    small = np.abs(ez) < 1e-8
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        big = clog1p(np.where(small, 0.0, ez)) / e
    return np.where(small, z * (1.0 - ez / 2.0 + ez * ez / 3.0), big)


@dataclass
class FoliationState:
    """Factor values and ``theta = d log H`` at a batch of points."""

    plain: np.ndarray  # (n, n_plain)
    near: np.ndarray | None  # (n,)
    theta: np.ndarray  # (n, 2)

    def take(self, idx) -> "FoliationState":
        return FoliationState(
            self.plain[idx], None if self.near is None else self.near[idx], self.theta[idx]
        )

    @staticmethod
    def concat(states) -> "FoliationState":
        states = list(states)
        near = None if states[0].near is None else np.concatenate([s.near for s in states])
        return FoliationState(
            np.concatenate([s.plain for s in states]), near, np.concatenate([s.theta for s in states])
        )


class Foliation:
    """Base class; subclasses implement :meth:`evaluate`."""

    names: list[str]
    coef: np.ndarray
    near_scale: float | None = None
    near_name: str | None = None

    @property
    def n_plain(self) -> int:
        return len(self.coef)

    @property
    def n_logs(self) -> int:
        return self.n_plain + 1

    def evaluate(self, P: np.ndarray) -> FoliationState:  # pragma: no cover - abstract
        raise NotImplementedError

    def _near_log(self, g):
        s = self.near_scale
        if s == 0:
            return np.asarray(g, dtype=complex)
        return log1p_over(s, g)

    def principal_logs(self, st: FoliationState) -> np.ndarray:
        n = st.plain.shape[0]
        out = np.zeros((n, self.n_logs), dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            out[:, : self.n_plain] = np.log(st.plain.astype(complex))
        if st.near is not None:
            out[:, -1] = self._near_log(st.near)
        return out

    def increments(self, s0: FoliationState, s1: FoliationState):
        """Branch increments from ``s0`` to ``s1`` and a mask of unambiguous rows."""
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = s1.plain / s0.plain
            inc = np.zeros((ratio.shape[0], self.n_logs), dtype=complex)
            inc[:, : self.n_plain] = np.log(ratio)
            ok = np.all(np.abs(np.angle(ratio)) < MAX_RATIO_ARG, axis=1) & np.all(
                np.isfinite(ratio), axis=1
            )
            if s0.near is not None:
                s = self.near_scale
                if s == 0:
                    inc[:, -1] = s1.near - s0.near
                else:
                    dz = (s1.near - s0.near) / (1.0 + s * s0.near)
                    inc[:, -1] = log1p_over(s, dz)
                    ok &= np.abs(np.angle(1.0 + s * dz)) < MAX_RATIO_ARG
                ok &= np.isfinite(inc[:, -1])
        return inc, ok

    def log_h(self, logs: np.ndarray) -> np.ndarray:
        return logs[:, : self.n_plain] @ self.coef + logs[:, -1]

    def lift(self, P: np.ndarray, st: FoliationState) -> np.ndarray:
        """Vector field ``L`` with ``theta(L) = 1`` (minimal-norm choice)."""
        th = st.theta
        nrm2 = np.sum(np.abs(th) ** 2, axis=1)
        return np.conj(th) / nrm2[:, None]

    def theta_norm(self, st: FoliationState) -> np.ndarray:
        return np.sqrt(np.sum(np.abs(st.theta) ** 2, axis=1))

    def nearest_factor(self, st: FoliationState) -> list[str]:
        """Name of the invariant curve closest (in value) to each point."""
        vals = np.abs(st.plain)
        names = list(self.names)
        if st.near is not None and self.near_scale not in (None, 0):
            vals = np.column_stack([vals, np.abs(1.0 + self.near_scale * st.near)])
            names = names + [self.near_name]
        return [names[i] for i in np.argmin(vals, axis=1)]

    def in_domain(self, P: np.ndarray) -> np.ndarray:
        return np.all(np.isfinite(P), axis=1)


class DarbouxFoliation(Foliation):
    """``log H = sum a_i log P_i + alpha log Q + log1p(eps R/Q)/eps`` (``+ R/Q`` at eps = 0)."""

    def __init__(self, sys: DarbouxSystem, params: UnfoldingParams):
        self.sys = sys
        self.params = params
        self.names = [f"P{i + 1}" for i in range(len(sys.factors))] + ["Q"]
        self.coef = np.array(sys.exponents + [params.alpha], dtype=float)
        self.near_scale = float(params.eps)
        self.near_name = "Q+eps*R"
        self._stack = PolyStack(sys.polys + [sys.q, sys.r])
        self._k = len(sys.factors)

    def evaluate(self, P: np.ndarray) -> FoliationState:
        P = np.asarray(P, dtype=complex).reshape(-1, 2)
        v, gx, gy = self._stack.values_and_grads(P[:, 0], P[:, 1])
        k = self._k
        eps, alpha = self.params.eps, self.params.alpha
        pv = v[: k + 1].T  # P_1..P_k, Q
        q, r = v[k], v[k + 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            g = r / q
            tx = (self.coef[:k, None] * gx[:k] / v[:k]).sum(axis=0) + alpha * gx[k] / q
            ty = (self.coef[:k, None] * gy[:k] / v[:k]).sum(axis=0) + alpha * gy[k] / q
            t = 1.0 + eps * g if eps != 0 else 1.0
            tx = tx + (q * gx[k + 1] - r * gx[k]) / (q * q) / t
            ty = ty + (q * gy[k + 1] - r * gy[k]) / (q * q) / t
        return FoliationState(pv.astype(complex), g.astype(complex), np.column_stack([tx, ty]))

    def in_domain(self, P: np.ndarray) -> np.ndarray:
        return np.all(np.isfinite(P), axis=1)

    def integrating_factor(self, P: np.ndarray) -> np.ndarray:
        P = np.asarray(P, dtype=complex).reshape(-1, 2)
        v = self._stack.values(P[:, 0], P[:, 1])
        k = self._k
        out = v[k] * (v[k] + self.params.eps * v[k + 1])
        for i in range(k):
            out = out * v[i]
        return out


@functools.lru_cache(maxsize=64)
def darboux_foliation(sys: DarbouxSystem, params: UnfoldingParams) -> DarbouxFoliation:
    return DarbouxFoliation(sys, params)
