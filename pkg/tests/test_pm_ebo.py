from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from spa_ftrl.pm.ebo import Model, ebo_objective, ebo_solve
from spa_ftrl.pm.game import PmGame, load_fixture
from spa_ftrl.pm.geometry import analyze_geometry, build_g0

from .oracles import ebo_objective_batch


def _geom(name):
    g = load_fixture(name)
    return g, analyze_geometry(g)


def test_zero_estimator_at_p_equal_q():
    """G = 0, p = q: only the bias survives, <q, L e_x> - min_c L_cx."""
    g, geom = _geom("three-action-lo")
    q = np.array([0.2, 0.5, 0.3])
    eta = 0.25
    val = ebo_objective(q, np.zeros((3, 3, 3)), q, eta, g, geom.pareto)
    hand = max(float(q @ g.L[:, x] - g.L[:, x].min()) for x in range(2)) / eta
    assert val == pytest.approx(hand, abs=1e-14)
    assert hand == pytest.approx(2.48, abs=1e-12)


def test_full_information_hand_evaluation():
    """G(0, x)_b = L_bx - L_0x and G(1, .) = 0 at q = p = uniform, eta = 0.1: the bias
    vanishes and the worst outcome gives 25 (e^0.2 - 1.2)."""
    g, geom = _geom("fi-2x2")
    G = np.zeros((2, 2, 2))
    for x in range(2):
        G[0, x] = g.L[:, x] - g.L[0, x]
    q = np.full(2, 0.5)
    val = ebo_objective(q, G, q, 0.1, g, geom.pareto)
    hand = 25 * (math.exp(0.2) - 1.2)
    assert val == pytest.approx(hand, rel=1e-12)
    assert hand == pytest.approx(0.535069, abs=1e-6)


def test_objective_matches_batch_oracle():
    rng = np.random.default_rng(2)
    for name in ("fi-2x2", "mab2-as-pm", "three-action-lo"):
        g, geom = _geom(name)
        for _ in range(200):
            p = rng.dirichlet(np.ones(g.k))
            q = rng.dirichlet(np.ones(g.k))
            G = rng.normal(0, 1, (g.k, g.n_symbols, g.k))
            eta = float(rng.uniform(0.05, 1.0))
            ref = ebo_objective_batch(p[None], G[None], q, eta, g.L, g.Phi, geom.pareto)[0]
            assert ebo_objective(p, G, q, eta, g, geom.pareto) == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_objective_is_convex():
    rng = np.random.default_rng(3)
    g, geom = _geom("three-action-lo")
    q = np.array([0.3, 0.3, 0.4])
    eta = 0.5
    for _ in range(1000):
        p1, p2 = rng.dirichlet(np.ones(3)) * 0.9 + 0.1 / 3, rng.dirichlet(np.ones(3)) * 0.9 + 0.1 / 3
        G1, G2 = rng.normal(0, 0.5, (2, 3, 3, 3))
        f1 = ebo_objective(p1, G1, q, eta, g, geom.pareto)
        f2 = ebo_objective(p2, G2, q, eta, g, geom.pareto)
        fm = ebo_objective((p1 + p2) / 2, (G1 + G2) / 2, q, eta, g, geom.pareto)
        assert fm <= (f1 + f2) / 2 + 1e-9


@pytest.mark.parametrize("name,model,cap", [("fi-2x2", Model.FI, 0.5), ("mab2-as-pm", Model.MAB, 1.0)])
def test_small_eta_values_are_bounded(name, model, cap):
    g, geom = _geom(name)
    eta = model.eta_threshold(g.k, g.m)
    rng = np.random.default_rng(4)
    for _ in range(20):
        q = rng.dirichlet(np.ones(g.k))
        res = ebo_solve(g, geom.pareto, q, eta, model)
        assert np.array_equal(res.p, q)
        assert res.opt_value <= cap
        assert res.dual_value <= res.opt_value + 1e-12


def test_solution_beats_starting_points():
    g, geom = _geom("three-action-lo")
    G0 = build_g0(geom)
    rng = np.random.default_rng(5)
    for _ in range(20):
        q = rng.dirichlet(np.ones(3))
        eta = float(rng.uniform(0.01, 0.5))
        res = ebo_solve(g, geom.pareto, q, eta, Model.PM_LOCAL, G_init=G0)
        assert res.opt_value <= ebo_objective(q, np.zeros_like(G0), q, eta, g, geom.pareto) + 1e-12
        assert res.opt_value <= ebo_objective(q, G0, q, eta, g, geom.pareto) + 1e-12
        assert res.p.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(res.p >= q / 6)


def test_pm_local_feasibility():
    g, geom = _geom("three-action-lo")
    rng = np.random.default_rng(6)
    for _ in range(50):
        q = rng.dirichlet(np.full(3, 0.3))
        res = ebo_solve(g, geom.pareto, q, float(rng.uniform(0.01, 1.0)), Model.PM_LOCAL)
        assert abs(res.p.sum() - 1.0) <= 1e-12
        assert np.all(res.p >= q / (2 * g.k))


def test_coarse_grid_is_an_upper_bound():
    """k = 2, d = 2, q uniform: the optimum is at most the best point of a 5-point grid
    per free coordinate of (p, G), and at least the solver's dual bound."""
    L = np.array([[0.1, 0.8], [0.7, 0.2]])
    q = np.full(2, 0.5)
    eta = 0.2
    levels = np.linspace(-1.0, 1.0, 5)
    for Phi, model in ((np.array([[0, 1], [0, 1]]), Model.FI), (np.array([[0, 1], [2, 2]]), Model.PM_LOCAL)):
        g = PmGame(L, Phi, ("x0", "x1", "none"))
        geom = analyze_geometry(g)
        free = [(a, s, c) for a in range(2) for s in sorted(set(Phi[a].tolist())) for c in range(2)]
        combos = np.array(list(itertools.product(levels, repeat=len(free))))
        G = np.zeros((combos.shape[0], 2, 3, 2))
        for j, (a, s, c) in enumerate(free):
            G[:, a, s, c] = combos[:, j]
        p_grid = [0.5] if model is Model.FI else np.linspace(0.125, 0.875, 5)
        best = math.inf
        for p0 in p_grid:
            P = np.tile([p0, 1 - p0], (combos.shape[0], 1))
            best = min(best, float(ebo_objective_batch(P, G, q, eta, L, Phi, geom.pareto).min()))
        res = ebo_solve(g, geom.pareto, q, eta, model)
        assert res.converged
        assert res.opt_value <= best + 1e-6
        assert res.dual_value <= res.opt_value + 1e-12
        assert res.opt_value - res.dual_value <= 1e-5
