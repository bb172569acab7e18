from __future__ import annotations

import math

import numpy as np
import pytest

from spa_ftrl.bounds import pm_additive
from spa_ftrl.pm.ebo import Model
from spa_ftrl.pm.game import GameError, load_fixture
from spa_ftrl.pm.geometry import analyze_geometry
from spa_ftrl.pm.runner import (AdversarialOutcomes, ConstantOutcome, StochasticOutcomes, draw_outcomes,
                                pm_run, pm_spa_config, vprime_certificate)


def _geom(name):
    g = load_fixture(name)
    return g, analyze_geometry(g)


def test_spa_config_formula():
    g = load_fixture("mab2-as-pm")
    cfg, h1, vbar = pm_spa_config(g, Model.MAB, 1000)
    assert cfg.beta1 == pytest.approx(1.0 * math.sqrt(math.log(1001) / math.log(2)), rel=1e-15)
    assert cfg.c1 == pytest.approx(math.sqrt(math.log(1001) / 2), rel=1e-15)
    assert cfg.c2 == 0.0 and h1 == pytest.approx(math.log(2)) and vbar == 1.0


def test_outcome_sources():
    rng = np.random.default_rng(0)
    assert np.all(draw_outcomes(ConstantOutcome(1), 2, 50, rng) == 1)
    x = draw_outcomes(StochasticOutcomes((0.375, 0.375, 0.125, 0.125)), 4, 100_000, rng)
    freq = np.bincount(x, minlength=4) / x.size
    assert np.allclose(freq, [0.375, 0.375, 0.125, 0.125], atol=0.01)
    y = draw_outcomes(AdversarialOutcomes(period=10, alpha=0.5), 3, 1000, rng)
    assert y.min() >= 0 and y.max() <= 2
    with pytest.raises(GameError):
        draw_outcomes(ConstantOutcome(5), 2, 10, rng)
    with pytest.raises(GameError):
        StochasticOutcomes((0.5, 0.6))
    with pytest.raises(GameError):
        AdversarialOutcomes(period=0)


def test_constant_outcome_full_information():
    """Against a fixed outcome V' decays to zero, stays below 1/2, and the realized
    regret stays within certificate plus additive term."""
    g, geom = _geom("fi-2x2")
    T = 500
    for seed in range(5):
        tr = pm_run(g, geom, ConstantOutcome(0), Model.FI, T, seed=seed)
        z = tr.columns["z"]
        assert tr.status == 0
        assert z.max() <= 0.5 and z[-1] <= 1e-3
        bound = tr.totals["certificate"] + pm_additive(Model.FI.B(2, 2), 2, T)
        assert tr.totals["final_regret"] <= bound


@pytest.mark.parametrize("name,model", [("fi-2x2", Model.FI), ("mab2-as-pm", Model.MAB),
                                        ("three-action-lo", Model.PM_LOCAL)])
def test_short_runs_have_no_violations(name, model):
    g, geom = _geom(name)
    tr = pm_run(g, geom, AdversarialOutcomes(period=50), model, 300, seed=7)
    assert tr.totals["error"] is None
    assert sum(tr.violations().values()) == 0
    c = tr.columns
    assert np.all(np.diff(c["beta"]) >= 0)
    assert np.all(c["floor_ok"] == 1) and np.all(c["seq_ok"] == 1)
    cert = np.array([vprime_certificate(s, g.k, 300) for s in np.cumsum(c["z"])])
    assert np.allclose(c["certificate"], cert, rtol=1e-12, atol=0)
    assert tr.totals["sum_vprime"] == pytest.approx(c["z"].sum(), rel=1e-12)


def test_run_is_deterministic():
    g, geom = _geom("three-action-lo")
    a = pm_run(g, geom, StochasticOutcomes((0.3, 0.7)), Model.PM_LOCAL, 200, seed=3)
    b = pm_run(g, geom, StochasticOutcomes((0.3, 0.7)), Model.PM_LOCAL, 200, seed=3)
    for name in a.columns:
        assert np.array_equal(a.columns[name], b.columns[name]), name


def test_geometry_mismatch_is_rejected():
    g, _ = _geom("fi-2x2")
    _, other = _geom("mab2-as-pm")
    with pytest.raises(GameError):
        pm_run(g, other, ConstantOutcome(0), Model.FI, 10)
    with pytest.raises(GameError):
        pm_run(g, analyze_geometry(g), ConstantOutcome(0), Model.FI, 0)
