"""Exploration by optimization (EbO).

For a reference distribution q and rate eta, the per-round problem is

    min_{p, G} max_x  (p - q).L e_x / eta + bias_q(G; x) / eta
                      + (1/eta^2) sum_a p_a Psi_q(eta G(a, Phi_ax) / p_a)

with Psi_q(z) = <q, exp(-z) + z - 1> and
bias_q(G; x) = <q, L e_x - sum_a G(a, Phi_ax)> + max_{c in Pareto} (sum_a G(a, Phi_ax)_c - L_cx).

Writing the two maxima as one maximum over (outcome x, Pareto action c) pairs puts
the problem in epigraph form, min t subject to f_xc(p, G) <= t, with every f_xc smooth
and jointly convex (the stability part is a perspective). The solver follows the
central path of the log barrier with Newton steps. G is kept at zero on non-Pareto
coordinates, and only entries G(a, s) for symbols s that action a can emit are free.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .game import PmGame

class Model(enum.Enum):
    FI = "fi"
    MAB = "mab"
    PM_LOCAL = "pm_local"

    def B(self, k: int, m: int) -> float:
        return {Model.FI: 0.5, Model.MAB: k / 2.0, Model.PM_LOCAL: 2.0 * m * k * k}[self]

    def vbar(self, k: int, m: int) -> float:
        return {Model.FI: 0.5, Model.MAB: k / 2.0, Model.PM_LOCAL: 3.0 * m * m * k ** 3}[self]

    def eta_threshold(self, k: int, m: int) -> float:
        return 1.0 / (2.0 * m * k * k)


@dataclass(frozen=True)
class EboResult:
    p: np.ndarray
    G: np.ndarray
    opt_value: float
    dual_value: float
    iterations: int
    converged: bool

    @property
    def Vprime(self) -> float:
        return max(0.0, self.opt_value)

    @property
    def gap(self) -> float:
        return self.opt_value - self.dual_value


# ---------------------------------------------------------------- objective


@njit(cache=True)
def _objective(L, Phi, pmask, p, G, q, eta):
    k, d = L.shape
    best = -np.inf
    for x in range(d):
        lin = 0.0
        for a in range(k):
            lin += (p[a] - q[a]) * L[a, x]
        # S_c = sum_a G(a, Phi_ax)_c
        qS = 0.0
        qL = 0.0
        smax = -np.inf
        for c in range(k):
            S = 0.0
            for a in range(k):
                S += G[a, Phi[a, x], c]
            qS += q[c] * S
            qL += q[c] * L[c, x]
            if pmask[c] and S - L[c, x] > smax:
                smax = S - L[c, x]
        bias = qL - qS + smax
        stab = 0.0
        for a in range(k):
            if p[a] <= 0.0:
                for c in range(k):
                    if G[a, Phi[a, x], c] != 0.0:
                        stab = np.inf
                continue
            s = 0.0
            for c in range(k):
                z = eta * G[a, Phi[a, x], c] / p[a]
                s += q[c] * (math.expm1(-z) + z)
            stab += p[a] * s
        f = lin / eta + bias / eta + stab / (eta * eta)
        if f > best:
            best = f
    return best


def ebo_objective(p, G, q, eta: float, game: PmGame, pareto) -> float:
    """max over outcomes of the EbO surrogate; G has shape (k, n_symbols, k)."""
    pmask = np.zeros(game.k, dtype=np.bool_)
    pmask[list(pareto)] = True
    return float(_objective(game.L, game.Phi, pmask, np.asarray(p, dtype=np.float64),
                            np.asarray(G, dtype=np.float64), np.asarray(q, dtype=np.float64), float(eta)))


# ---------------------------------------------------------------- solver


@njit(cache=True)
def _layout(Phi, pmask, nsym):
    """Index of the free entry G[a, s, c] (s used in row a, c Pareto), or -1."""
    k, d = Phi.shape
    idx = -np.ones((k, nsym, k), dtype=np.int64)
    n = 0
    for a in range(k):
        used = np.zeros(nsym, dtype=np.bool_)
        for x in range(d):
            used[Phi[a, x]] = True
        for s in range(nsym):
            if used[s]:
                for c in range(k):
                    if pmask[c]:
                        idx[a, s, c] = n
                        n += 1
    return idx, n


@njit(cache=True)
def _constraints(y, L, Phi, pmask, idx, ng, q, eta, pm, want_derivs):
    """Values f_xc (rows ordered by x then Pareto c), their gradients and the
    per-outcome Hessians (shared by every c). Returns ok=False on overflow."""
    k, d = L.shape
    n = y.shape[0]
    npar = 0
    for c in range(k):
        if pmask[c]:
            npar += 1
    m = d * npar
    f = np.empty(m)
    grads = np.zeros((m, n)) if want_derivs else np.zeros((1, 1))
    hess = np.zeros((d, n, n)) if want_derivs else np.zeros((1, 1, 1))
    p = np.empty(k)
    for a in range(k):
        p[a] = y[ng + a] if pm else q[a]
        if p[a] <= 0.0:
            return f, grads, hess, False
    base_grad = np.zeros(n)
    for x in range(d):
        lin = 0.0
        for a in range(k):
            lin += (p[a] - q[a]) * L[a, x] + q[a] * L[a, x]
        stab = 0.0
        qS = 0.0
        if want_derivs:
            base_grad[:] = 0.0
        for a in range(k):
            s = Phi[a, x]
            pa_grad = 0.0
            pa_hess = 0.0
            for c in range(k):
                v = idx[a, s, c]
                if v < 0:
                    continue
                g = y[v]
                z = eta * g / p[a]
                if -z > 700.0:
                    return f, grads, hess, False
                e = math.exp(-z)
                stab += p[a] * q[c] * (math.expm1(-z) + z)
                qS += q[c] * g
                if want_derivs:
                    base_grad[v] = -q[c] * e / eta
                    hess[x, v, v] += q[c] * e / p[a]
                    if pm:
                        pa_grad += q[c] * (e * (1.0 + z) - 1.0)
                        pa_hess += q[c] * z * z * e / p[a]
                        cross = -q[c] * z * e / (eta * p[a])
                        hess[x, v, ng + a] += cross
                        hess[x, ng + a, v] += cross
            if want_derivs and pm:
                base_grad[ng + a] = L[a, x] / eta + pa_grad / (eta * eta)
                hess[x, ng + a, ng + a] += pa_hess / (eta * eta)
        base = lin / eta - qS / eta + stab / (eta * eta)
        j = x * npar
        for c in range(k):
            if not pmask[c]:
                continue
            S = 0.0
            for a in range(k):
                v = idx[a, Phi[a, x], c]
                if v >= 0:
                    S += y[v]
            f[j] = base + (S - L[c, x]) / eta
            if want_derivs:
                grads[j, :] = base_grad
                for a in range(k):
                    v = idx[a, Phi[a, x], c]
                    if v >= 0:
                        grads[j, v] += 1.0 / eta
            j += 1
    return f, grads, hess, True


@njit(cache=True)
def _barrier(y, tau, L, Phi, pmask, idx, ng, q, fl, eta, pm):
    n = y.shape[0]
    t = y[n - 1]
    f, _, _, ok = _constraints(y, L, Phi, pmask, idx, ng, q, eta, pm, False)
    if not ok:
        return np.inf
    val = tau * t
    for j in range(f.shape[0]):
        s = t - f[j]
        if not s > 0.0:
            return np.inf
        val -= math.log(s)
    if pm:
        for a in range(q.shape[0]):
            r = y[ng + a] - fl[a]
            if not r > 0.0:
                return np.inf
            val -= math.log(r)
    return val


@njit(cache=True)
def _newton_step(y, tau, L, Phi, pmask, idx, ng, q, fl, eta, pm):
    k, d = L.shape
    n = y.shape[0]
    t = y[n - 1]
    f, grads, hess, ok = _constraints(y, L, Phi, pmask, idx, ng, q, eta, pm, True)
    m = f.shape[0]
    npar = m // d
    g = np.zeros(n)
    H = np.zeros((n, n))
    g[n - 1] = tau
    w = np.empty(n)
    for j in range(m):
        s = t - f[j]
        for i in range(n):
            w[i] = -grads[j, i]
        w[n - 1] += 1.0
        for i in range(n):
            g[i] -= w[i] / s
        s2 = s * s
        for i in range(n):
            if w[i] != 0.0:
                wi = w[i] / s2
                for l in range(n):
                    H[i, l] += wi * w[l]
        x = j // npar
        H += hess[x] / s
    if pm:
        for a in range(k):
            r = y[ng + a] - fl[a]
            g[ng + a] -= 1.0 / r
            H[ng + a, ng + a] += 1.0 / (r * r)
    # tiny ridge keeps flat directions (entries with exp(-z) ~ 0) solvable
    for i in range(n):
        H[i, i] += 1e-14 * (1.0 + abs(H[i, i]))
    if pm:
        K = np.zeros((n + 1, n + 1))
        K[:n, :n] = H
        for a in range(k):
            K[ng + a, n] = 1.0
            K[n, ng + a] = 1.0
        rhs = np.zeros(n + 1)
        rhs[:n] = -g
        sol = np.linalg.solve(K, rhs)
        dy = sol[:n]
    else:
        dy = np.linalg.solve(H, -g)
    dec = 0.0
    for i in range(n):
        dec -= g[i] * dy[i]
    return dy, dec, g


@njit(cache=True)
def _start(L, Phi, pmask, idx, ng, n, q, eta, pm, starts):
    """Pack the best of the candidate G tensors (smallest max f) into y, p = q."""
    k = L.shape[0]
    nsym = starts.shape[2]
    best_y = np.zeros(n)
    best_f = np.inf
    for i in range(starts.shape[0]):
        y = np.zeros(n)
        for a in range(k):
            for s in range(nsym):
                for c in range(k):
                    if idx[a, s, c] >= 0:
                        y[idx[a, s, c]] = starts[i, a, s, c]
        if pm:
            for a in range(k):
                y[ng + a] = q[a]
        f, _, _, ok = _constraints(y, L, Phi, pmask, idx, ng, q, eta, pm, False)
        if ok and f.max() < best_f:
            best_f = f.max()
            best_y = y
    return best_y, best_f


@njit(cache=True)
def _solve(L, Phi, pmask, nsym, q, fl, eta, pm, starts, tol, max_newton):
    k, d = L.shape
    idx, ng = _layout(Phi, pmask, nsym)
    n = ng + (k if pm else 0) + 1
    y, fmax = _start(L, Phi, pmask, idx, ng, n, q, eta, pm, starts)
    y[n - 1] = fmax + max(1.0, abs(fmax))
    npar = 0
    for c in range(k):
        if pmask[c]:
            npar += 1
    m_tot = d * npar + (k if pm else 0)
    tau = m_tot / max(1.0, abs(fmax))
    total = 0
    converged = False
    slack = 1.0
    while total < max_newton:
        # centering; a decrement below 2e-6 that no longer shrinks is the rounding floor
        # of the barrier, and the gap estimate is then doubled
        centered = False
        dec = np.inf
        for _ in range(100):
            dy, dec, g = _newton_step(y, tau, L, Phi, pmask, idx, ng, q, fl, eta, pm)
            total += 1
            if dec * 0.5 <= 1e-10:
                break
            if not np.all(np.isfinite(dy)):
                break
            F0 = _barrier(y, tau, L, Phi, pmask, idx, ng, q, fl, eta, pm)
            step = 1.0
            moved = False
            for _ls in range(80):
                yn = y + step * dy
                Fn = _barrier(yn, tau, L, Phi, pmask, idx, ng, q, fl, eta, pm)
                if Fn <= F0 - 0.25 * step * dec:
                    y = yn
                    moved = True
                    break
                step *= 0.5
            if not moved or total >= max_newton:
                break
        if dec * 0.5 <= 1e-10:
            centered = True
            slack = 1.0
        elif dec * 0.5 <= 1e-6:
            centered = True
            slack = 2.0
        if not centered:
            break
        if slack * m_tot / tau <= tol * max(1.0, abs(y[n - 1])):
            converged = True
            break
        tau *= 10.0
    G = np.zeros((k, nsym, k))
    for a in range(k):
        for s in range(nsym):
            for c in range(k):
                if idx[a, s, c] >= 0:
                    G[a, s, c] = y[idx[a, s, c]]
    p = np.empty(k)
    for a in range(k):
        p[a] = y[ng + a] if pm else q[a]
    return p, G, y[n - 1] - slack * m_tot / tau, total, converged


def ebo_solve(game: PmGame, pareto, q, eta: float, model: Model, tol: float = 1e-6,
              G_init: np.ndarray | None = None, max_newton: int = 1000) -> EboResult:
    """Approximate minimizer of the EbO surrogate over the model's feasible set.

    FI and MAB fix p = q; PM-local allows any p with p >= q / (2k). The problem is
    written in epigraph form over the (outcome, Pareto action) pairs and solved by a
    log-barrier Newton method, so opt_value (the exact objective at the returned
    point) exceeds the optimum by at most the barrier gap m / tau. The start is the
    better of G = 0 and G_init (typically the previous round's solution).
    """
    if not eta > 0.0:
        raise ValueError("eta must be positive")
    qa = np.asarray(q, dtype=np.float64)
    pmask = np.zeros(game.k, dtype=np.bool_)
    pmask[list(pareto)] = True
    pm = model is Model.PM_LOCAL
    fl = qa / (2 * game.k)
    starts = [np.zeros((game.k, game.n_symbols, game.k))]
    if G_init is not None:
        starts.append(np.asarray(G_init, dtype=np.float64))
    p, G, lower, iters, ok = _solve(game.L, game.Phi, pmask, game.n_symbols, qa, fl, float(eta), pm,
                                    np.stack(starts), float(tol), int(max_newton))
    if pm:
        # Newton steps keep sum(p) = 1 only up to accumulated rounding
        p = p / p.sum()
        if np.any(p < fl):
            p = np.maximum(p, fl)
            p /= p.sum()
    value = float(_objective(game.L, game.Phi, pmask, p, G, qa, float(eta)))
    # the lower bound t - m/tau is valid only at a centered point
    return EboResult(p, G, value, float(lower) if ok else -np.inf, int(iters), bool(ok))
