"""Cell geometry, neighbor structure, local-observability witnesses and G0.

Cell of action a: {u in simplex : (L_a - L_b) . u <= 0 for all b}. Dimensions are
affine dimensions of these polytopes, found by detecting implicit equalities with
one LP per inequality and taking d minus the rank of the tight system.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .game import DegenerateGame, DuplicateActions, GameError, NotLocallyObservable, PmGame

LP_TOL = 1e-9
WITNESS_TOL = 1e-8
IDENTITY_TOL = 1e-8

DOMINATED = "dominated"
PARETO = "pareto"
DEGENERATE = "degenerate"


def _halfspaces(game: PmGame, actions: tuple[int, ...]) -> np.ndarray:
    """Rows g with g . u <= 0 describing the intersection of the given cells."""
    rows = []
    for a in actions:
        for b in range(game.k):
            if b != a:
                rows.append(game.L[a] - game.L[b])
    rows.extend(-np.eye(game.d))
    return np.asarray(rows)


def polytope_dim(G: np.ndarray, d: int, tol: float = LP_TOL) -> int:
    """Affine dimension of {u : G u <= 0, sum u = 1}; -1 if empty."""
    A_eq = np.ones((1, d))
    b_eq = np.ones(1)
    zeros = np.zeros(G.shape[0])
    bounds = [(None, None)] * d
    feas = linprog(np.zeros(d), A_ub=G, b_ub=zeros, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if feas.status != 0:
        return -1
    tight = [np.ones(d)]
    for g in G:
        res = linprog(g, A_ub=G, b_ub=zeros, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
        # g . u cannot be made negative: the inequality holds with equality on the whole set
        if res.status == 0 and res.fun >= -tol:
            tight.append(g)
    return d - int(np.linalg.matrix_rank(np.asarray(tight), tol=1e-9))


def cell_dim(game: PmGame, a: int) -> int:
    return polytope_dim(_halfspaces(game, (a,)), game.d)


def intersection_dim(game: PmGame, a: int, b: int) -> int:
    return polytope_dim(_halfspaces(game, (a, b)), game.d)


def witness(game: PmGame, a: int, b: int) -> tuple[np.ndarray, float]:
    """Minimum-norm w on rows {a, b} with w(a, Phi_ax) + w(b, Phi_bx) = L_ax - L_bx.

    Returns a (k, n_symbols) array and the max residual over outcomes.
    """
    cols = [(a, s) for s in sorted(set(game.Phi[a].tolist()))]
    cols += [(b, s) for s in sorted(set(game.Phi[b].tolist()))]
    M = np.zeros((game.d, len(cols)))
    for j, (c, s) in enumerate(cols):
        M[:, j] = game.Phi[c] == s
    rhs = game.L[a] - game.L[b]
    sol = np.linalg.lstsq(M, rhs, rcond=None)[0]
    W = np.zeros((game.k, game.n_symbols))
    for j, (c, s) in enumerate(cols):
        W[c, s] += sol[j]
    return W, float(np.max(np.abs(M @ sol - rhs)))


def witness_residual(game: PmGame, W: np.ndarray, a: int, b: int) -> float:
    rows = np.arange(game.k)[:, None]
    recon = W[rows, game.Phi].sum(axis=0)
    return float(np.max(np.abs(recon - (game.L[a] - game.L[b]))))


@dataclass(frozen=True, eq=False)
class GameGeometry:
    game: PmGame
    classes: tuple[str, ...]
    cell_dims: tuple[int, ...]
    pareto: tuple[int, ...]
    neighbors: tuple[tuple[int, int], ...]
    witnesses: dict
    cells: tuple[np.ndarray, ...]

    def witness_for(self, a: int, b: int) -> np.ndarray:
        """Witness reconstructing L_a - L_b."""
        if (a, b) in self.witnesses:
            return self.witnesses[(a, b)]
        return -self.witnesses[(b, a)]


def classify_actions(game: PmGame) -> tuple[list[str], list[int]]:
    """Per-action class and cell dimension, without rejecting anything."""
    dup_of = {}
    for group in game.duplicate_groups():
        for a in group[1:]:
            dup_of[a] = group[0]
    classes, dims = [], []
    for a in range(game.k):
        dim = cell_dim(game, a)
        dims.append(dim)
        if a in dup_of:
            classes.append(f"duplicate-of-{dup_of[a]}")
        elif dim == game.d - 1:
            classes.append(PARETO)
        elif dim < 0:
            classes.append(DOMINATED)
        else:
            classes.append(DEGENERATE)
    return classes, dims


def analyze_geometry(game: PmGame) -> GameGeometry:
    groups = game.duplicate_groups()
    if groups:
        raise DuplicateActions(groups)
    classes, dims = classify_actions(game)
    bad = [a for a, c in enumerate(classes) if c == DEGENERATE]
    if bad:
        raise DegenerateGame(bad, {a: dims[a] for a in bad})
    pareto = tuple(a for a, c in enumerate(classes) if c == PARETO)
    neighbors = []
    witnesses = {}
    for i, a in enumerate(pareto):
        for b in pareto[i + 1:]:
            if intersection_dim(game, a, b) == game.d - 2:
                W, res = witness(game, a, b)
                if res > WITNESS_TOL:
                    raise NotLocallyObservable((a, b), res)
                neighbors.append((a, b))
                witnesses[(a, b)] = W
    cells = tuple(_halfspaces(game, (a,)) for a in range(game.k))
    return GameGeometry(game, tuple(classes), tuple(dims), pareto, tuple(neighbors), witnesses, cells)


def spanning_tree(geom: GameGeometry) -> dict[int, int]:
    """Parent map of the BFS tree over Pareto actions rooted at the smallest index."""
    if not geom.pareto:
        raise GameError("game has no Pareto action")
    adj: dict[int, list[int]] = {a: [] for a in geom.pareto}
    for a, b in geom.neighbors:
        adj[a].append(b)
        adj[b].append(a)
    root = geom.pareto[0]
    parent = {root: root}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in sorted(adj[u]):
            if v not in parent:
                parent[v] = u
                queue.append(v)
    missing = sorted(set(geom.pareto) - set(parent))
    if missing:
        raise GameError(f"neighbor graph is disconnected; unreachable Pareto actions {missing}")
    return parent


def build_g0(geom: GameGeometry) -> np.ndarray:
    """G0[a, sigma, b] = sum of witnesses along the tree path from the root to b.

    With this choice sum_a G0[a, Phi_ax, b] = L_bx - L_root,x for every Pareto b;
    coordinates of non-Pareto actions are zero.
    """
    game = geom.game
    G = np.zeros((game.k, game.n_symbols, game.k))
    if len(geom.pareto) <= 1:
        return G
    parent = spanning_tree(geom)
    for b in geom.pareto:
        v = b
        while parent[v] != v:
            u = parent[v]
            G[:, :, b] += geom.witness_for(v, u)
            v = u
    return G


def identity_residual(game: PmGame, G: np.ndarray, pareto) -> float:
    """max over Pareto b, c and outcomes x of
    |sum_a (G[a, Phi_ax, b] - G[a, Phi_ax, c]) - (L_bx - L_cx)|."""
    pareto = list(pareto)
    rows = np.arange(game.k)[:, None]
    S = G[rows, game.Phi, :].sum(axis=0)        # (d, k)
    worst = 0.0
    for b in pareto:
        for c in pareto:
            diff = S[:, b] - S[:, c] - (game.L[b] - game.L[c])
            worst = max(worst, float(np.max(np.abs(diff))))
    return worst
