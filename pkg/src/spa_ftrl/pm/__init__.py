"""Partial-monitoring games, their geometry and the exploration-by-optimization learner."""
from __future__ import annotations

from .ebo import EboResult, Model, ebo_objective, ebo_solve
from .game import (DegenerateGame, DuplicateActions, GameError, NotLocallyObservable, PmGame, fixture_names,
                   load_fixture, load_game, save_game)
from .geometry import GameGeometry, analyze_geometry, build_g0, identity_residual
from .runner import AdversarialOutcomes, ConstantOutcome, StochasticOutcomes, pm_run

__all__ = [
    "EboResult", "Model", "ebo_objective", "ebo_solve", "DegenerateGame", "DuplicateActions", "GameError",
    "NotLocallyObservable", "PmGame", "fixture_names", "load_fixture", "load_game", "save_game",
    "GameGeometry", "analyze_geometry", "build_g0", "identity_residual", "AdversarialOutcomes",
    "ConstantOutcome", "StochasticOutcomes", "pm_run",
]
