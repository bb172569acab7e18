"""Best-of-both-worlds partial-monitoring learner: Shannon FTRL, EbO exploration and
the SPA learning rate driven by the truncated EbO value V'."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..bandits import episode_streams, sample_arm
from ..environments import RegretTrace
from ..ftrl import solve_q
from ..simplex import shannon_entropy
from ..spa import SequenceConditionViolation, SpaConfig, SpaState, check_sequence_conditions, spa_update
from .ebo import Model, ebo_solve
from .game import GameError, PmGame
from .geometry import GameGeometry

VBAR_TOL = 1e-9

PM_FLAG_COLUMNS = ("vbar_ok", "seq_ok", "floor_ok")


@dataclass(frozen=True)
class StochasticOutcomes:
    probs: tuple

    def __post_init__(self) -> None:
        pr = np.asarray(self.probs, dtype=np.float64)
        if pr.ndim != 1 or np.any(pr < 0) or abs(pr.sum() - 1.0) > 1e-9:
            raise GameError("outcome probabilities must form a distribution")


@dataclass(frozen=True)
class AdversarialOutcomes:
    """Oblivious outcomes: every `period` rounds a fresh outcome distribution is drawn
    from a Dirichlet(alpha) prior, and outcomes are sampled from the current one."""

    period: int = 100
    alpha: float = 0.5

    def __post_init__(self) -> None:
        if self.period < 1 or not self.alpha > 0:
            raise GameError("period must be >= 1 and alpha > 0")


@dataclass(frozen=True)
class ConstantOutcome:
    x: int


OutcomeSource = StochasticOutcomes | AdversarialOutcomes | ConstantOutcome


def draw_outcomes(source: OutcomeSource, d: int, T: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(source, ConstantOutcome):
        if not 0 <= source.x < d:
            raise GameError(f"constant outcome {source.x} outside [0, {d})")
        return np.full(T, source.x, dtype=np.int64)
    if isinstance(source, StochasticOutcomes):
        pr = np.asarray(source.probs, dtype=np.float64)
        if pr.size != d:
            raise GameError(f"need {d} outcome probabilities, got {pr.size}")
        return np.minimum(np.searchsorted(np.cumsum(pr), rng.random(T), side="right"), d - 1)
    n_blocks = -(-T // source.period)
    dists = rng.dirichlet(np.full(d, source.alpha), size=n_blocks)
    u = rng.random(T)
    cdf = np.cumsum(dists, axis=1)[np.arange(T) // source.period]
    return np.minimum((u[:, None] > cdf).sum(axis=1), d - 1)


def pm_spa_config(game: PmGame, model: Model, T: int) -> tuple[SpaConfig, float, float]:
    """(config, h1, Vbar): beta1 = B sqrt(log(1+T)/log k), c1 = sqrt(log(1+T)/2), c2 = 0."""
    k, m = game.k, game.m
    lk = math.log(k)
    B = model.B(k, m)
    cfg = SpaConfig(c1=math.sqrt(math.log1p(T) / 2.0), c2=0.0, beta1=B * math.sqrt(math.log1p(T) / lk))
    return cfg, lk, model.vbar(k, m)


def vprime_certificate(sum_vprime: float, k: int, T: int) -> float:
    return math.sqrt(2.0 * sum_vprime * math.log(k) * math.log1p(T))


def pm_run(game: PmGame, geom: GameGeometry, source: OutcomeSource, model: Model, T: int,
           seed: int = 0, ebo_tol: float = 1e-6) -> RegretTrace:
    """T rounds of the partial-monitoring learner. Per-round flags: vbar_ok (V' <= Vbar,
    checked for FI/MAB always and for PM-local once eta <= 1/(2mk^2)), seq_ok (sequence
    conditions of the rate) and floor_ok (p feasible for the model). The column
    ebo_converged is a solver diagnostic: a non-converged solve still returns the exact
    objective at a feasible point, which upper-bounds the optimum."""
    if geom.game is not game:
        raise GameError("geometry was computed for a different game")
    if T < 1:
        raise GameError("T must be positive")
    k, d = game.k, game.d
    cfg, h1, vbar = pm_spa_config(game, model, T)
    eta_thr = model.eta_threshold(k, game.m)
    env_rng, draw_rng = episode_streams(seed)
    outcomes = draw_outcomes(source, d, T, env_rng)
    uniforms = draw_rng.random(T)
    if isinstance(source, StochasticOutcomes):
        means = game.L @ np.asarray(source.probs, dtype=np.float64)
        gaps = means - means.min()
    elif isinstance(source, ConstantOutcome):
        gaps = game.L[:, source.x] - game.L[:, source.x].min()
    else:
        gaps = None

    state = SpaState.initial(cfg, h1)
    cum = np.zeros(k)
    q = np.full(k, 1.0 / k)
    cum_outcome_loss = np.zeros(k)
    learner = 0.0
    regret = 0.0
    sum_v = 0.0
    G_prev = None
    cols = {
        "t": np.arange(1, T + 1, dtype=np.int64),
        "A_t": np.zeros(T, dtype=np.int64),
        "x_t": outcomes.astype(np.int64),
        "loss_observed": np.zeros(T),
        "regret_cum": np.zeros(T),
        "beta": np.zeros(T),
        "h": np.zeros(T),
        "z": np.zeros(T),
        "zbar": np.full(T, vbar),
        "opt_value": np.zeros(T),
        "ebo_gap": np.zeros(T),
        "certificate": np.zeros(T),
        "ebo_converged": np.zeros(T, dtype=np.int8),
    }
    for name in PM_FLAG_COLUMNS:
        cols[name] = np.full(T, -1, dtype=np.int8)
    error = None
    for i in range(T):
        eta = 1.0 / state.beta
        res = ebo_solve(game, geom.pareto, q, eta, model, tol=ebo_tol, G_init=G_prev)
        p = res.p
        v = res.Vprime
        arm = sample_arm(p, uniforms[i])
        x = int(outcomes[i])
        sym = int(game.Phi[arm, x])
        y_hat = res.G[arm, sym] / p[arm]
        cum += y_hat
        loss = float(game.L[arm, x])
        if gaps is None:
            cum_outcome_loss += game.L[:, x]
            learner += loss
            regret = learner - float(cum_outcome_loss.min())
        else:
            regret += float(gaps[arm])
        beta_t = state.beta
        h_t = shannon_entropy(q)
        beta_next = state.beta if v == 0.0 else state.beta + cfg.c1 * v / math.sqrt(vbar * h1 + state.sum_zh)
        q_next, _, _ = solve_q(cum, beta_next, 0.0)
        h_next = shannon_entropy(q_next)
        try:
            check_sequence_conditions(state, v, vbar, h_next, cfg)
            seq_ok = 1
        except SequenceConditionViolation:
            seq_ok = 0
        try:
            spa_update(state, v, vbar, h_next, None, cfg, beta_next=beta_next, validate=False)
        except SequenceConditionViolation as exc:
            error = f"round {i + 1}: {exc}"
            cols = {name: col[:i] for name, col in cols.items()}
            break
        sum_v += v
        if model is Model.PM_LOCAL:
            floor_ok = bool(np.all(p >= q / (2 * k)) and abs(p.sum() - 1.0) <= 1e-12)
            check_vbar = eta <= eta_thr
        else:
            floor_ok = bool(np.array_equal(p, q))
            check_vbar = True
        cols["A_t"][i] = arm
        cols["loss_observed"][i] = loss
        cols["regret_cum"][i] = regret
        cols["beta"][i] = beta_t
        cols["h"][i] = h_t
        cols["z"][i] = v
        cols["opt_value"][i] = res.opt_value
        cols["ebo_gap"][i] = res.gap
        cols["certificate"][i] = vprime_certificate(sum_v, k, T)
        cols["vbar_ok"][i] = (1 if v <= vbar * (1 + VBAR_TOL) else 0) if check_vbar else -1
        cols["seq_ok"][i] = seq_ok
        cols["floor_ok"][i] = 1 if floor_ok else 0
        cols["ebo_converged"][i] = 1 if res.converged else 0
        G_prev = res.G
        q = q_next

    totals = {
        "artifact": "pm", "game": game.name, "model": model.value, "k": k, "d": d, "m": game.m,
        "T": T, "seed": int(seed), "B": model.B(k, game.m), "Vbar": vbar,
        "beta1": cfg.beta1, "c1": cfg.c1, "beta_final": float(state.beta),
        "sum_vprime": sum_v,
        "ebo_nonconverged": int(np.count_nonzero(cols["ebo_converged"] == 0)),
        "certificate": vprime_certificate(sum_v, k, T),
        "final_regret": float(cols["regret_cum"][-1]) if cols["regret_cum"].size else 0.0,
        "error": error,
    }
    trace = RegretTrace(cols, totals)
    trace.totals["violations"] = trace.violations()
    trace.totals["status"] = trace.status
    return trace
