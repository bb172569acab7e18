"""FTRL bandit and partial-monitoring learners with stability-penalty-adaptive
learning rates, plus certificate checks for their regret bounds."""
from __future__ import annotations

from .bandits import Agent, AgentConfig, Algo, C1Preset, run_episode
from .environments import (AdversarialSparse, CorruptedStochastic, Noise, Pattern, RegretTrace, Schedule,
                           StochasticSparse)
from .ftrl import RegularizerSpec, solve_ftrl
from .simplex import DomainError, LossRange, LossVector, ProbVector
from .spa import SpaConfig, SpaState, spa_update

__version__ = "0.1.0"

__all__ = [
    "Agent", "AgentConfig", "Algo", "C1Preset", "run_episode",
    "AdversarialSparse", "CorruptedStochastic", "Noise", "Pattern", "RegretTrace", "Schedule",
    "StochasticSparse", "RegularizerSpec", "solve_ftrl", "DomainError", "LossRange", "LossVector",
    "ProbVector", "SpaConfig", "SpaState", "spa_update",
]
