"""Numeric types on the probability simplex and the closed-form stability facts.

The two scalar functions

    xi(x)   = exp(-x) + x - 1
    zeta(x) = x - log(1 + x)

are the per-coordinate stability terms of the negative Shannon entropy and of the
log-barrier: for a coordinate value x and a linear perturbation a,

    max_y { a (x - y) - D_{y log y}(y, x) }   = x * xi(a)
    max_y { a (x - y) - D_{log(1/y)}(y, x) }  = zeta(a x)      (a >= -1/x)
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

SUM_TOL = 1e-12
RENORM_TOL = 1e-9


class DomainError(ValueError):
    """An argument lies outside the domain of the function."""


class LossRange(enum.Enum):
    UNIT = "unit"            # [0, 1]
    SYMMETRIC = "symmetric"  # [-1, 1]

    @property
    def bounds(self) -> tuple[float, float]:
        return (0.0, 1.0) if self is LossRange.UNIT else (-1.0, 1.0)


class ProbVector:
    """Immutable point on the (k-1)-simplex.

    Inputs whose sum is off by more than 1e-12 but within 1e-9 of one are
    renormalized; anything further away, or with a negative entry, is rejected.
    """

    __slots__ = ("_v",)

    def __init__(self, values) -> None:
        v = np.array(values, dtype=np.float64, copy=True).reshape(-1)
        if v.size < 2:
            raise DomainError("a probability vector needs k >= 2 entries")
        if not np.all(np.isfinite(v)):
            raise DomainError("probability vector has non-finite entries")
        if np.any(v < 0.0):
            raise DomainError(f"negative probability entry {v.min()!r}")
        s = float(v.sum())
        if abs(s - 1.0) > RENORM_TOL:
            raise DomainError(f"entries sum to {s!r}, not 1")
        if abs(s - 1.0) > SUM_TOL:
            v = v / s
        v.setflags(write=False)
        self._v = v

    @classmethod
    def uniform(cls, k: int) -> "ProbVector":
        return cls(np.full(k, 1.0 / k))

    @classmethod
    def basis(cls, k: int, i: int) -> "ProbVector":
        v = np.zeros(k)
        v[i] = 1.0
        return cls(v)

    @property
    def values(self) -> np.ndarray:
        return self._v

    @property
    def k(self) -> int:
        return int(self._v.size)

    def __array__(self, dtype=None, copy=None):
        return self._v if dtype is None else self._v.astype(dtype)

    def __len__(self) -> int:
        return self.k

    def __getitem__(self, i):
        return self._v[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProbVector):
            return NotImplemented
        return bool(np.array_equal(self._v, other._v))

    def __hash__(self) -> int:
        return hash(self._v.tobytes())

    def __repr__(self) -> str:
        return f"ProbVector({np.array2string(self._v, precision=6)})"


@dataclass(frozen=True)
class LossVector:
    values: np.ndarray
    range: LossRange

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        lo, hi = self.range.bounds
        if np.any(v < lo) or np.any(v > hi):
            raise DomainError(f"loss entries outside {self.range.value} range")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def k(self) -> int:
        return int(self.values.size)

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.values))

    @property
    def sq_norm(self) -> float:
        return float(self.values @ self.values)


def _arr(p) -> np.ndarray:
    if isinstance(p, ProbVector):
        return p.values
    return np.asarray(p, dtype=np.float64)


def shannon_entropy(p) -> float:
    """H(p) = -sum p log p with 0 log 0 = 0."""
    v = _arr(p)
    nz = v[v > 0.0]
    return float(-(nz * np.log(nz)).sum())


def xi(x):
    """exp(-x) + x - 1, accurate near zero."""
    if np.ndim(x) == 0:
        return math.expm1(-x) + x
    x = np.asarray(x, dtype=np.float64)
    return np.expm1(-x) + x


def zeta(x):
    """x - log(1 + x), defined for x > -1."""
    if np.ndim(x) == 0:
        if x <= -1.0:
            raise DomainError(f"zeta undefined at {x!r} <= -1")
        return x - math.log1p(x)
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= -1.0):
        raise DomainError("zeta undefined at x <= -1")
    return x - np.log1p(x)


class StabilityKind(enum.Enum):
    SHANNON = "shannon"
    LOG_BARRIER = "log_barrier"


def stability_sup(kind: StabilityKind, a: float, x: float) -> float:
    """Closed form of max_{y>0} { a (x - y) - D(y, x) } for one regularizer coordinate."""
    if not 0.0 < x <= 1.0:
        raise DomainError(f"x must lie in (0, 1], got {x!r}")
    if kind is StabilityKind.SHANNON:
        return x * xi(a)
    if a < -1.0 / x:
        raise DomainError("log-barrier stability needs a >= -1/x")
    if a * x == -1.0:
        # the supremum is approached as y -> infinity and is infinite
        return math.inf
    return zeta(a * x)


class Divergence(enum.Enum):
    NEG_SHANNON = "neg_shannon"
    LOG_BARRIER = "log_barrier"


@dataclass(frozen=True)
class Hybrid:
    """beta * (negative Shannon) + c * (log-barrier)."""

    beta: float
    c: float


def _neg_shannon_div(p: np.ndarray, q: np.ndarray) -> float:
    pos = p > 0.0
    # generalized KL, also valid off the simplex
    return float((p[pos] * np.log(p[pos] / q[pos])).sum() - p.sum() + q.sum())


def _log_barrier_div(p: np.ndarray, q: np.ndarray) -> float:
    if np.any(p <= 0.0):
        return math.inf
    r = p / q
    return float((r - 1.0 - np.log(r)).sum())


def bregman(kind, p, q) -> float:
    """Bregman divergence D(p, q) of a simplex regularizer."""
    pv, qv = _arr(p), _arr(q)
    if pv.shape != qv.shape:
        raise DomainError("p and q differ in length")
    if np.any(qv <= 0.0):
        raise DomainError("q must be strictly positive")
    if kind is Divergence.NEG_SHANNON:
        return max(_neg_shannon_div(pv, qv), 0.0)
    if kind is Divergence.LOG_BARRIER:
        return max(_log_barrier_div(pv, qv), 0.0)
    if isinstance(kind, Hybrid):
        out = kind.beta * _neg_shannon_div(pv, qv)
        if kind.c != 0.0:
            out += kind.c * _log_barrier_div(pv, qv)
        return max(out, 0.0)
    raise TypeError(f"unknown divergence kind {kind!r}")


def mix_uniform(q, gamma: float) -> ProbVector:
    """(1 - gamma) q + gamma / k."""
    if not 0.0 <= gamma <= 0.5:
        raise DomainError(f"gamma must lie in [0, 1/2], got {gamma!r}")
    v = _arr(q)
    return ProbVector((1.0 - gamma) * v + gamma / v.size)
