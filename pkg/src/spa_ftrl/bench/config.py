"""Experiment configuration: a versioned JSON document.

Schema (version 1)::

    {
      "schema_version": 1,
      "name": "bobw-adversarial",              # used for output naming
      "artifact": "mab" | "pm",
      "T": [10000],                            # horizon grid, each entry >= 1
      "seeds": 20 | [3, 5, 7],                 # count (derived from master_seed) or explicit list
      "master_seed": 0,                        # optional, default 0
      "checkpoints": [100, 1000],              # optional rounds at which regret is also reported
      "certificates": {"bound": true, "trend": false, "per_round": true},
      "parallel": 1,                           # optional worker processes
      "out": "runs/bobw-adversarial",          # optional output directory

      # artifact "mab"
      "agent": {"algo": "sparse_exp3_spa" | "sparse_lb_spa" | "sparse_bobw", "k": 8,
                "c1": null, "c1_preset": "theorem" | "proof", "bisection": "illinois" | "bisection"},
      "env": {"kind": "adversarial", "s": 2, "range": "unit" | "symmetric",
              "pattern": "fixed" | "rotating" | "random" | "adaptive", "pattern_seed": null,
              "best_arm_weight": 0.5}
           | {"kind": "stochastic", "means": [...], "noise": "bernoulli" | "uniform_around"}
           | {"kind": "corrupted", "means": [...], "C": 50, "schedule": "front" | "spread",
              "noise": "bernoulli"},

      # artifact "pm"
      "game": "<fixture name or path to a game file>",
      "model": "fi" | "mab" | "pm_local",
      "outcomes": {"kind": "stochastic", "probs": [...]} | {"kind": "adversarial", "period": 100,
                   "alpha": 0.5} | {"kind": "constant", "x": 0}
    }

The "trend" certificate compares mean regret across the T grid (or across the
checkpoints when the grid has one entry) and requires growth by a factor of at most
3 per decade.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..bandits import AgentConfig, Algo, C1Preset
from ..environments import AdversarialSparse, CorruptedStochastic, StochasticSparse
from ..simplex import DomainError

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration; `field` names the offending entry."""

    def __init__(self, field_name: str, msg: str):
        super().__init__(f"{field_name}: {msg}")
        self.field = field_name


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict
    name: str
    artifact: str
    T_grid: tuple[int, ...]
    seeds: tuple[int, ...]
    checkpoints: tuple[int, ...] = ()
    certificates: dict = field(default_factory=dict)
    parallel: int = 1
    out: str | None = None

    @property
    def config_hash(self) -> str:
        return config_hash(self.raw)


def config_hash(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def derive_seeds(master: int, n: int) -> tuple[int, ...]:
    """Episode seeds keyed on (master seed, episode index): independent of the order
    or process in which episodes run."""
    return tuple(int(np.random.SeedSequence(master, spawn_key=(i,)).generate_state(1, np.uint32)[0])
                 for i in range(n))


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}{key}", "missing required field")
    return d[key]


def _int(value, name: str, lo: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(name, f"expected an integer, got {value!r}")
    if int(value) < lo:
        raise ConfigError(name, f"must be >= {lo}, got {value!r}")
    return int(value)


def build_env(raw: dict, k: int | None = None):
    env = _require(raw, "env", "")
    kind = _require(env, "kind", "env.")
    try:
        if kind == "adversarial":
            if k is None:
                raise ConfigError("agent.k", "missing required field")
            return AdversarialSparse(k=k, s=_int(_require(env, "s", "env."), "env.s", 0),
                                     range=env.get("range", "unit"), pattern=env.get("pattern", "random"),
                                     pattern_seed=env.get("pattern_seed"),
                                     best_arm_weight=float(env.get("best_arm_weight", 0.5)))
        if kind == "stochastic":
            return StochasticSparse(tuple(_require(env, "means", "env.")), env.get("noise", "bernoulli"))
        if kind == "corrupted":
            return CorruptedStochastic(tuple(_require(env, "means", "env.")), float(_require(env, "C", "env.")),
                                       env.get("schedule", "front"), env.get("noise", "bernoulli"))
    except (DomainError, ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("env", str(exc)) from None
    raise ConfigError("env.kind", f"unknown environment kind {kind!r}")


def build_agent(raw: dict, T: int, seed: int) -> AgentConfig:
    agent = _require(raw, "agent", "")
    algo = _require(agent, "algo", "agent.")
    k = _int(_require(agent, "k", "agent."), "agent.k", 2)
    try:
        return AgentConfig(Algo(algo), k, T, c1_override=agent.get("c1"),
                           c1_preset=C1Preset(agent.get("c1_preset", "theorem")), seed=seed,
                           bisection=agent.get("bisection", "illinois"))
    except ValueError as exc:
        raise ConfigError("agent", str(exc)) from None


def build_pm(raw: dict):
    """(game, geometry, model, outcome source); geometry errors surface as ConfigError."""
    from ..pm.ebo import Model
    from ..pm.game import GameError, load_fixture, load_game
    from ..pm.geometry import analyze_geometry
    from ..pm.runner import AdversarialOutcomes, ConstantOutcome, StochasticOutcomes

    ref = str(_require(raw, "game", ""))
    try:
        game = load_game(ref) if ref.endswith(".json") or Path(ref).is_file() else load_fixture(ref)
        geom = analyze_geometry(game)
    except (GameError, OSError) as exc:
        raise ConfigError("game", str(exc)) from None
    try:
        model = Model(_require(raw, "model", ""))
    except ValueError:
        raise ConfigError("model", f"unknown model {raw['model']!r}") from None
    out = _require(raw, "outcomes", "")
    kind = _require(out, "kind", "outcomes.")
    try:
        if kind == "stochastic":
            src = StochasticOutcomes(tuple(float(v) for v in _require(out, "probs", "outcomes.")))
            if len(src.probs) != game.d:
                raise ConfigError("outcomes.probs", f"need {game.d} probabilities")
        elif kind == "adversarial":
            src = AdversarialOutcomes(_int(out.get("period", 100), "outcomes.period"), float(out.get("alpha", 0.5)))
        elif kind == "constant":
            src = ConstantOutcome(_int(_require(out, "x", "outcomes."), "outcomes.x", 0))
            if src.x >= game.d:
                raise ConfigError("outcomes.x", f"outcome index must be < {game.d}")
        else:
            raise ConfigError("outcomes.kind", f"unknown outcome source {kind!r}")
    except GameError as exc:
        raise ConfigError("outcomes", str(exc)) from None
    return game, geom, model, src


def parse_config(raw: dict, seeds_override: int | None = None, parallel_override: int | None = None,
                 out_override: str | None = None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    version = _require(raw, "schema_version", "")
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version!r} (expected {SCHEMA_VERSION})")
    artifact = _require(raw, "artifact", "")
    if artifact not in ("mab", "pm"):
        raise ConfigError("artifact", f"expected 'mab' or 'pm', got {artifact!r}")
    T_raw = _require(raw, "T", "")
    if not isinstance(T_raw, list) or not T_raw:
        raise ConfigError("T", "expected a non-empty list of horizons")
    T_grid = tuple(_int(v, f"T[{i}]") for i, v in enumerate(T_raw))
    if seeds_override is not None:
        seeds = derive_seeds(_int(raw.get("master_seed", 0), "master_seed", 0), _int(seeds_override, "--seeds"))
    else:
        s = _require(raw, "seeds", "")
        if isinstance(s, list):
            if not s:
                raise ConfigError("seeds", "empty seed list")
            seeds = tuple(_int(v, f"seeds[{i}]", 0) for i, v in enumerate(s))
        else:
            seeds = derive_seeds(_int(raw.get("master_seed", 0), "master_seed", 0), _int(s, "seeds"))
    checkpoints = tuple(_int(v, f"checkpoints[{i}]") for i, v in enumerate(raw.get("checkpoints", [])))
    if checkpoints and max(checkpoints) > min(T_grid):
        raise ConfigError("checkpoints", "every checkpoint must be <= the smallest horizon")
    certs = {"bound": True, "trend": False, "per_round": True}
    certs.update(raw.get("certificates", {}))
    unknown = set(certs) - {"bound", "trend", "per_round"}
    if unknown:
        raise ConfigError("certificates", f"unknown certificate toggles {sorted(unknown)}")
    parallel = _int(parallel_override if parallel_override is not None else raw.get("parallel", 1), "parallel")
    name = str(raw.get("name", "experiment"))

    # validate the artifact-specific part for every horizon before anything runs
    if artifact == "mab":
        k = _int(_require(_require(raw, "agent", ""), "k", "agent."), "agent.k", 2)
        env = build_env(raw, k)
        if env.k != k:
            raise ConfigError("env.means", f"environment has {env.k} arms, agent.k = {k}")
        for T in T_grid:
            build_agent(raw, T, 0)
    else:
        build_pm(raw)
    return ExperimentConfig(raw, name, artifact, T_grid, seeds, checkpoints, certs, parallel,
                            out_override or raw.get("out"))


def load_config(path: str | Path, **overrides) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError("<file>", str(exc)) from None
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"not valid JSON: {exc}") from None
    return parse_config(raw, **overrides)
