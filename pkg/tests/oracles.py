"""Independent reference computations used by the tests.

Each oracle solves its problem by brute force (grids, direct summation, dense
enumeration) rather than through the package's own closed forms or solvers.
"""
from __future__ import annotations

import math

import numpy as np
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from spa_ftrl.simplex import StabilityKind


@st.composite
def probs(draw, k_min: int = 2, k_max: int = 8, min_entry: float = 0.0, k: int | None = None):
    """A probability vector built from drawn positive weights."""
    k = draw(st.integers(k_min, k_max)) if k is None else k
    w = np.array(draw(st.lists(st.floats(0.0, 1.0), min_size=k, max_size=k)), dtype=np.float64)
    w = w + 1e-3
    p = w / w.sum()
    if min_entry > 0:
        p = np.maximum(p, min_entry)
        p = p / p.sum()
    return p


@st.composite
def prob_pairs(draw, k_min: int = 2, k_max: int = 8, min_entry: float = 0.0):
    k = draw(st.integers(k_min, k_max))
    return draw(probs(k=k, min_entry=min_entry)), draw(probs(k=k, min_entry=min_entry))


# ---------------------------------------------------------------- simplex-core


def _div(kind: StabilityKind, y: np.ndarray, x: float) -> np.ndarray:
    if kind is StabilityKind.SHANNON:
        return y * np.log(y / x) - y + x
    return y / x - 1.0 - np.log(y / x)


def stability_sup_grid(kind: StabilityKind, a: float, x: float, step: float | None = None) -> float:
    """max over y in (0, 10] of a (x - y) - D(y, x).

    With `step` the maximum is taken over the uniform grid of that step. Without it a
    log-spaced grid locates the maximizer and a bounded scalar search polishes it.
    """
    if step is not None:
        best = -math.inf
        n = int(round(10.0 / step))
        for lo in range(1, n + 1, 1_000_000):
            y = np.arange(lo, min(lo + 1_000_000, n + 1), dtype=np.float64) * step
            best = max(best, float(np.max(a * (x - y) - _div(kind, y, x))))
        return best
    y = np.geomspace(1e-12, 10.0, 20_001)
    g = a * (x - y) - _div(kind, y, x)
    i = int(np.argmax(g))
    lo, hi = y[max(i - 1, 0)], y[min(i + 1, y.size - 1)]
    res = minimize_scalar(lambda v: -(a * (x - v) - float(_div(kind, np.array([v]), x)[0])),
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return max(float(g[i]), -float(res.fun))


# ---------------------------------------------------------------- ftrl


def ftrl_grid_k2(L: np.ndarray, beta: float, c: float, step: float = 1e-7) -> np.ndarray:
    """Minimize <L, q> + beta sum q log q + c sum log(1/q) over q = (u, 1-u) on a grid."""
    u = np.arange(1, int(round(1.0 / step)), dtype=np.float64) * step
    w = 1.0 - u
    f = L[0] * u + L[1] * w + beta * (u * np.log(u) + w * np.log(w))
    if c > 0:
        f -= c * (np.log(u) + np.log(w))
    i = int(np.argmin(f))
    return np.array([u[i], w[i]])


def softmax_closed_form(L: np.ndarray, beta: float) -> np.ndarray:
    z = -(L - L.min()) / beta
    e = np.exp(z)
    return e / e.sum()


# ---------------------------------------------------------------- spa-rate


def spa_sequence(rng: np.random.Generator, T: int, h1: float, c1: float, c2: float, beta1: float,
                 constant_h: bool = False):
    """A random (z, zbar, h_next) sequence satisfying the rate's sequence conditions:
    h_{t+1} <= h1, zbar_t h1 >= z_t h_{t+1}, and a non-decreasing radicand."""
    z = rng.exponential(1.0, T) * (rng.random(T) < 0.8)
    h = np.full(T, h1) if constant_h else rng.uniform(0.05, 1.0, T) * h1
    zbar = np.maximum.accumulate(np.maximum(z * h / h1, rng.uniform(0.0, 2.0, T)))
    return z, zbar, h


def reference_beta_path(z, zbar, h, h1, c1, c2, beta1) -> np.ndarray:
    """beta_1..beta_{T+1} by direct summation of the update formula."""
    beta = [beta1]
    for t in range(len(z)):
        rad = c2 + zbar[t] * h1 + float(np.dot(z[:t], h[:t]))
        beta.append(beta[-1] + (c1 * z[t] / math.sqrt(rad) if z[t] > 0 else 0.0))
    return np.asarray(beta)


# ---------------------------------------------------------------- implicit beta root


def bobw_h(cum_loss: np.ndarray, alpha: float, k: int, T: int) -> float:
    """h(alpha) = H(p) / (1 - k/T) for p = (1 - k/T) q + 1/T, q the FTRL point at beta = alpha."""
    from spa_ftrl.ftrl import solve_q
    q = solve_q(cum_loss, alpha, 4.0, relative=True)[0]
    p = (1.0 - k / T) * q + 1.0 / T
    return float(-(p * np.log(p)).sum()) / (1.0 - k / T)


def bobw_F(alpha: float, r: dict) -> float:
    h = bobw_h(r["L_next"], alpha, r["k"], r["T"])
    return alpha - (r["beta_t"] + r["c1"] * r["nu"] / math.sqrt(r["c2"] + r["nu"] * h + r["sum_zh"]))


def bobw_rounds(k: int, T: int, n_rounds: int, seed: int, record_every: int = 1) -> list[dict]:
    """Drive a best-of-both-worlds agent on random sparse symmetric losses and record,
    for rounds with nu > 0, everything the implicit update saw and the root it chose."""
    from spa_ftrl.bandits import Agent, AgentConfig, Algo, nu
    rng = np.random.default_rng(seed)
    agent = Agent(AgentConfig(Algo.BOBW, k, T), checks=False)
    out = []
    for t in range(n_rounds):
        loss_vec = np.zeros(k)
        supp = rng.choice(k, size=2, replace=False)
        loss_vec[supp] = rng.uniform(-1, 1, 2)
        arm = int(rng.choice(k, p=agent.p))
        loss = float(loss_vec[arm])
        pa = float(agent.p[arm])
        L_next = agent.cum_est_loss.copy()
        L_next[arm] += loss / pa
        rec = {"k": k, "T": T, "beta_t": agent.beta, "sum_zh": agent.spa.sum_zh, "c1": agent.spa_cfg.c1,
               "c2": agent.spa_cfg.c2, "nu": nu(loss * loss / pa, pa, 1.0 / agent.beta), "L_next": L_next}
        step = agent.step(arm, loss)
        rec["beta_next"] = step.beta_next
        if rec["nu"] > 0 and t % record_every == 0:
            out.append(rec)
    return out


def grid_root_cells(r: dict, cells: int = 10**6) -> tuple[np.ndarray, float]:
    """Sign-change cells of F on the uniform grid of [beta_t, beta_t + T] with `cells` cells.

    F > 0 beyond beta_t + nu/9 (the increment is at most c1 nu / sqrt(c2) = nu/9), so only
    grid points up to one cell past that can carry a sign change.
    """
    step = r["T"] / cells
    b = r["beta_t"]
    n_hi = int(math.ceil((r["c1"] * r["nu"] / math.sqrt(r["c2"])) / step)) + 1
    grid = b + step * np.arange(0, min(n_hi, cells) + 1)
    F = np.array([bobw_F(a, r) for a in grid])
    idx = np.nonzero((F[:-1] < 0) & (F[1:] >= 0))[0]
    return grid[idx], step


# ---------------------------------------------------------------- pm geometry


def lp_margin(L: np.ndarray, a: int, others, equal_to: int | None = None) -> float:
    """Largest s with u in the simplex, u >= s, (L_c - L_a) u >= s for c in others and,
    if given, L_a u = L_b u for b = equal_to. Positive s certifies a relatively open set
    of such u, i.e. a cell (or pairwise face) of full dimension."""
    from scipy.optimize import linprog
    k, d = L.shape
    others = list(others)
    A_ub = np.zeros((len(others) + d, d + 1))
    for i, c in enumerate(others):
        A_ub[i, :d] = -(L[c] - L[a])
        A_ub[i, d] = 1.0
    A_ub[len(others):, :d] = -np.eye(d)
    A_ub[len(others):, d] = 1.0
    A_eq = [np.r_[np.ones(d), 0.0]]
    b_eq = [1.0]
    if equal_to is not None:
        A_eq.append(np.r_[L[a] - L[equal_to], 0.0])
        b_eq.append(0.0)
    res = linprog(np.r_[np.zeros(d), -1.0], A_ub=A_ub, b_ub=np.zeros(A_ub.shape[0]), A_eq=np.asarray(A_eq),
                  b_eq=np.asarray(b_eq), bounds=[(None, None)] * d + [(None, 1.0)], method="highs")
    return -float(res.fun) if res.status == 0 else -math.inf


def lp_geometry(L: np.ndarray, tol: float = 1e-9) -> tuple[tuple[int, ...], tuple[tuple[int, int], ...]]:
    """Pareto actions and neighbor pairs from strict-margin LPs (generic games)."""
    k = L.shape[0]
    pareto = tuple(a for a in range(k) if lp_margin(L, a, [c for c in range(k) if c != a]) > tol)
    nbrs = tuple((a, b) for i, a in enumerate(pareto) for b in pareto[i + 1:]
                 if lp_margin(L, a, [c for c in range(k) if c not in (a, b)], equal_to=b) > tol)
    return pareto, nbrs


def segment_geometry(L: np.ndarray) -> tuple[tuple[int, ...], tuple[tuple[int, int], ...]]:
    """d = 2: cells are intervals of u0 in [0, 1] with u = (u0, 1 - u0). Pareto actions
    are strict unique minimizers somewhere; neighbors share a minimizing point, found by
    intersecting every pair of loss lines exactly."""
    k = L.shape[0]
    f = lambda a, u: L[a, 0] * u + L[a, 1] * (1 - u)
    pts = {0.0, 1.0}
    for a in range(k):
        for b in range(a + 1, k):
            den = (L[a, 0] - L[a, 1]) - (L[b, 0] - L[b, 1])
            if den != 0:
                u = (L[b, 1] - L[a, 1]) / den
                if 0.0 <= u <= 1.0:
                    pts.add(float(u))
    pts = sorted(pts)
    pareto = set()
    for lo, hi in zip(pts[:-1], pts[1:]):
        mid = (lo + hi) / 2
        vals = np.array([f(a, mid) for a in range(k)])
        winners = np.flatnonzero(vals <= vals.min() + 1e-12)
        if winners.size == 1:
            pareto.add(int(winners[0]))
    pareto = tuple(sorted(pareto))
    nbrs = set()
    for u in pts:
        vals = np.array([f(a, u) for a in range(k)])
        winners = [a for a in pareto if vals[a] <= vals.min() + 1e-12]
        nbrs.update((a, b) for i, a in enumerate(winners) for b in winners[i + 1:])
    return pareto, tuple(sorted(nbrs))


# ---------------------------------------------------------------- pm surrogate


def ebo_objective_batch(p: np.ndarray, G: np.ndarray, q: np.ndarray, eta: float, L: np.ndarray,
                        Phi: np.ndarray, pareto) -> np.ndarray:
    """The EbO surrogate for a batch: p (N, k) and G (N, k, n_symbols, k).

    For each outcome x: <p - q, L e_x>/eta + (<q, L e_x - S_x> + max_c (S_x - L e_x)_c)/eta
    + sum_a p_a Psi_q(eta G(a, Phi_ax) / p_a) / eta^2, with S_x = sum_a G(a, Phi_ax) and
    Psi_q(z) = sum_c q_c (exp(-z_c) + z_c - 1); the result is the maximum over x.
    """
    k, d = L.shape
    pareto = list(pareto)
    out = np.full(p.shape[0], -np.inf)
    for x in range(d):
        Gx = G[:, np.arange(k), Phi[:, x], :]               # (N, a, c)
        S = Gx.sum(axis=1)                                  # (N, c)
        lin = (p - q) @ L[:, x]
        bias = q @ L[:, x] - S @ q + np.max((S - L[:, x])[:, pareto], axis=1)
        z = eta * Gx / p[:, :, None]
        with np.errstate(over="ignore"):
            stab = np.sum(p * np.sum(q * (np.exp(-z) + z - 1.0), axis=2), axis=1)
        out = np.maximum(out, lin / eta + bias / eta + stab / eta ** 2)
    return out
