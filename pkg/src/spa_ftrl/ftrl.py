"""FTRL over the simplex with an entropy + log-barrier regularizer.

The per-round problem is

    q = argmin_q  <L, q> + beta * sum_i q_i log q_i + c * sum_i log(1 / q_i).

For c = 0 this is exponential weights. For c > 0 the stationarity condition is

    L_i + beta log q_i - c / q_i + mu = 0,   sum_i q_i = 1,

and each q_i(mu) is found by inverting the strictly increasing map
q -> beta log q - c / q, wrapped in a 1-D root find on mu.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .simplex import DomainError, Hybrid, ProbVector, bregman

DEFAULT_TOL = 1e-10
MAX_OUTER = 200
MAX_INNER = 200


class FtrlConvergenceError(RuntimeError):
    """Iteration cap reached before the KKT residual dropped below tolerance."""

    def __init__(self, msg: str, q: np.ndarray, mu: float, residual: float):
        super().__init__(msg)
        self.q = q
        self.mu = mu
        self.residual = residual


@dataclass(frozen=True)
class RegularizerSpec:
    beta: float
    barrier_weight: float = 0.0

    def __post_init__(self) -> None:
        if not (self.beta > 0.0 and math.isfinite(self.beta)):
            raise DomainError(f"beta must be positive and finite, got {self.beta!r}")
        if not self.barrier_weight >= 0.0:
            raise DomainError(f"barrier weight must be >= 0, got {self.barrier_weight!r}")


@dataclass(frozen=True)
class FtrlSolution:
    q: ProbVector
    mu: float
    kkt_residual: float
    iterations: int


# ---------------------------------------------------------------- kernels


@njit(cache=True)
def _inv_coord(y, beta, c, max_inner):
    """Solve beta*log(q) - c/q = y for q in (0, 1], given y <= -c.

    Works in u = log q, where f(u) = beta*u - c*exp(-u) - y is concave and
    increasing; Newton started left of the root climbs monotonically onto it.
    """
    if y >= -c:
        return 1.0, 0
    qlo = c / (abs(y) + beta + c)
    if qlo < 1e-300:
        qlo = 1e-300
    lo = math.log(qlo)
    hi = 0.0
    u = lo
    for it in range(max_inner):
        e = math.exp(-u)
        f = beta * u - c * e - y
        # stop once f is at the rounding floor of its own terms
        if abs(f) <= 4e-16 * (abs(beta * u) + c * e + abs(y)):
            return math.exp(u), it + 1
        if f < 0.0:
            lo = u
        else:
            hi = u
        step = f / (beta + c * e)
        un = u - step
        if un <= lo or un >= hi:
            un = 0.5 * (lo + hi)
        if abs(un - u) <= 1e-15 * (1.0 + abs(u)):
            return math.exp(un), it + 1
        u = un
    return math.exp(u), max_inner


@njit(cache=True)
def _coords(Ls, mu, beta, c, q, max_inner):
    """Fill q with q_i(mu); return (sum q, d sum / d mu, inner iterations)."""
    s = 0.0
    ds = 0.0
    iters = 0
    for i in range(Ls.shape[0]):
        qi, it = _inv_coord(-Ls[i] - mu, beta, c, max_inner)
        q[i] = qi
        s += qi
        ds -= qi * qi / (beta * qi + c)
        iters += it
    return s, ds, iters


@njit(cache=True)
def _solve_hybrid(Ls, beta, c, mu0, max_outer, max_inner):
    """Ls must be shifted so that min(Ls) == 0. Returns (q, mu, residual, iters, converged)."""
    k = Ls.shape[0]
    q = np.empty(k)
    # At mu_lo the smallest-loss coordinate sits exactly at q = 1, at mu_hi every
    # coordinate is at most 1/k, so the root lies in between.
    mu_lo = c
    mu_hi = beta * math.log(k) + c * k
    mu = mu0
    if not (mu > mu_lo and mu < mu_hi):
        mu = mu_lo
    lo = mu_lo
    hi = mu_hi
    total = 0
    converged = False
    for it in range(max_outer):
        s, ds, inner = _coords(Ls, mu, beta, c, q, max_inner)
        total += 1
        phi = s - 1.0
        if phi > 0.0:
            lo = mu
        elif phi < 0.0:
            hi = mu
        else:
            converged = True
            break
        mun = mu - phi / ds
        if not (mun > lo and mun < hi):
            mun = 0.5 * (lo + hi)
        if abs(mun - mu) <= 4e-16 * (1.0 + abs(mu)) or hi - lo <= 4e-16 * (1.0 + abs(mu)):
            mu = mun
            _coords(Ls, mu, beta, c, q, max_inner)
            converged = True
            break
        mu = mun
    q /= q.sum()
    res = 0.0
    for i in range(k):
        r = abs(Ls[i] + beta * math.log(q[i]) - c / q[i] + mu)
        if r > res:
            res = r
    return q, mu, res, total, converged


@njit(cache=True)
def _softmax(Ls, beta):
    """Ls shifted so min == 0. Returns (q, mu, residual)."""
    k = Ls.shape[0]
    q = np.empty(k)
    for i in range(k):
        q[i] = math.exp(-Ls[i] / beta)
    z = q.sum()
    res = 0.0
    logz = math.log(z)
    for i in range(k):
        q[i] /= z
    mu = beta * logz
    for i in range(k):
        if q[i] > 0.0:
            r = abs(Ls[i] + beta * math.log(q[i]) + mu)
            if r > res:
                res = r
    return q, mu, res


# ---------------------------------------------------------------- API


def solve_q(cum_loss: np.ndarray, beta: float, c: float, tol: float = DEFAULT_TOL,
            mu0: float = math.nan, relative: bool = False) -> tuple[np.ndarray, float, float]:
    """Array-level solver used in hot loops: returns (q, mu, kkt_residual).

    The residual is measured on the loss shifted by its minimum, which leaves the
    solution unchanged; mu is reported for the unshifted loss. With relative=True
    the tolerance is scaled by max(1, spread of the loss), since the terms of the
    stationarity condition are of that size and carry rounding error in proportion.
    """
    L = np.asarray(cum_loss, dtype=np.float64)
    if not np.all(np.isfinite(L)):
        raise DomainError("cumulative loss has non-finite entries")
    lmin = float(L.min())
    Ls = L - lmin
    if c == 0.0:
        q, mu, res = _softmax(Ls, float(beta))
        return q, mu - lmin, res
    shifted0 = mu0 + lmin if math.isfinite(mu0) else math.nan
    q, mu, res, iters, ok = _solve_hybrid(Ls, float(beta), float(c), shifted0, MAX_OUTER, MAX_INNER)
    if relative:
        tol = tol * max(1.0, float(Ls.max()))
    if res > tol:
        raise FtrlConvergenceError(
            f"hybrid FTRL solve stopped with residual {res:.3e} > tol {tol:.1e} after {iters} iterations",
            q, mu - lmin, res)
    return q, mu - lmin, res


def solve_ftrl(cum_loss, reg: RegularizerSpec, tol: float = DEFAULT_TOL,
               mu0: float | None = None) -> FtrlSolution:
    """Minimize <L, q> + beta * sum q log q + c * sum log(1/q) over the simplex."""
    if not tol > 0.0:
        raise DomainError("tol must be positive")
    L = np.asarray(cum_loss, dtype=np.float64)
    if L.ndim != 1 or L.size < 2:
        raise DomainError("cumulative loss must be a vector of length >= 2")
    c = float(reg.barrier_weight)
    if c == 0.0:
        q, mu, res = solve_q(L, reg.beta, 0.0, tol)
        iters = 0
    else:
        lmin = float(L.min())
        start = (mu0 + lmin) if mu0 is not None else math.nan
        q, mu_s, res, iters, _ = _solve_hybrid(L - lmin, float(reg.beta), c, start, MAX_OUTER, MAX_INNER)
        mu = mu_s - lmin
        if res > tol:
            raise FtrlConvergenceError(
                f"residual {res:.3e} exceeds tol {tol:.1e} after {iters} outer iterations", q, mu, res)
    return FtrlSolution(ProbVector(q), float(mu), float(res), int(iters))


def regularizer_value(q, reg: RegularizerSpec) -> float:
    """beta * sum q log q + c * sum log(1/q)."""
    v = np.asarray(q, dtype=np.float64)
    pos = v > 0.0
    out = reg.beta * float((v[pos] * np.log(v[pos])).sum())
    if reg.barrier_weight > 0.0:
        if np.any(v <= 0.0):
            raise DomainError("log-barrier needs strictly positive q")
        out -= reg.barrier_weight * float(np.log(v).sum())
    return out


def ftrl_objective(q, cum_loss, reg: RegularizerSpec) -> float:
    v = np.asarray(q, dtype=np.float64)
    return float(np.dot(np.asarray(cum_loss, dtype=np.float64), v)) + regularizer_value(v, reg)


def penalty_stability_split(q_t, q_next, reg_t: RegularizerSpec, reg_next: RegularizerSpec,
                            y_hat) -> tuple[float, float]:
    """penalty = Phi_t(q_{t+1}) - Phi_{t+1}(q_{t+1});
    stability = <q_t - q_{t+1}, y_hat> - D_{Phi_t}(q_{t+1}, q_t)."""
    a = np.asarray(q_t, dtype=np.float64)
    b = np.asarray(q_next, dtype=np.float64)
    y = np.asarray(y_hat, dtype=np.float64)
    penalty = regularizer_value(b, reg_t) - regularizer_value(b, reg_next)
    div = bregman(Hybrid(reg_t.beta, reg_t.barrier_weight), b, a)
    return penalty, float(np.dot(a - b, y)) - div


def hybrid_divergence(p: np.ndarray, q: np.ndarray, beta: float, c: float) -> float:
    """Array-level D_Phi(p, q) for Phi = beta * neg-entropy + c * log-barrier, written
    in terms of r = p/q to keep cancellation small when p is close to q."""
    d = p / q - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        lp = np.log1p(d)
        # p_i = 0 contributes 0 log 0 = 0 to the entropy part
        ent = np.where(d > -1.0, (1.0 + d) * lp, 0.0) - d
    out = beta * float((q * ent).sum())
    if c > 0.0:
        out += c * float((d - lp).sum())
    return out


def stability_term(q_t: np.ndarray, q_next: np.ndarray, y_hat: np.ndarray, beta: float, c: float) -> float:
    return float(np.dot(q_t - q_next, y_hat)) - hybrid_divergence(q_next, q_t, beta, c)


__all__ = [
    "DEFAULT_TOL", "FtrlConvergenceError", "FtrlSolution", "RegularizerSpec",
    "solve_ftrl", "solve_q", "ftrl_objective", "regularizer_value",
    "penalty_stability_split", "hybrid_divergence", "stability_term",
]
