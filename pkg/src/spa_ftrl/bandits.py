"""Sparse multi-armed bandit agents with SPA learning rates.

Three agents share one skeleton: q_t from FTRL on the cumulative inverse-weighted
loss estimate, a sampling distribution p_t = T_t(q_t), and a SPA update of beta.

==================  ==========  =============  ======================  =========
algorithm           loss range  barrier c      p_t                     z_t
==================  ==========  =============  ======================  =========
sparse_exp3_spa     [0, 1]      0              (1-g) q + g/k, g~T^-2/3 omega_t
sparse_lb_spa       [-1, 1]     2              q                       nu_t
sparse_bobw         [-1, 1]     4              (1-k/T) q + 1/T         nu_t
==================  ==========  =============  ======================  =========

with omega_t = l^2 / p_{A} and nu_t = omega_t * min(1, p_A beta_t / 2).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .ftrl import solve_q, stability_term
from .simplex import DomainError, LossRange, ProbVector
from .spa import (SpaConfig, SpaState, check_s1, check_s2, implicit_update_bisection,
                  next_beta, spa_update)

# additive slack on per-round lemma checks
CHECK_TOL = 1e-8
SOLVE_TOL = 1e-10


class Algo(enum.Enum):
    EXP3 = "sparse_exp3_spa"
    LOG_BARRIER = "sparse_lb_spa"
    BOBW = "sparse_bobw"

    @property
    def loss_range(self) -> LossRange:
        return LossRange.UNIT if self is Algo.EXP3 else LossRange.SYMMETRIC

    @property
    def barrier(self) -> float:
        return {Algo.EXP3: 0.0, Algo.LOG_BARRIER: 2.0, Algo.BOBW: 4.0}[self]


class C1Preset(enum.Enum):
    THEOREM = "theorem"  # sqrt(2 log(1 + T / beta1)), as in the theorem statement
    PROOF = "proof"      # sqrt(2 log(1 + T^2 / beta1)), as used inside its proof


@dataclass(frozen=True)
class AgentConfig:
    algo: Algo
    k: int
    T: int
    c1_override: float | None = None
    c1_preset: C1Preset = C1Preset.THEOREM
    seed: int = 0
    bisection: str = "illinois"

    def __post_init__(self) -> None:
        if isinstance(self.algo, str):
            object.__setattr__(self, "algo", Algo(self.algo))
        if isinstance(self.c1_preset, str):
            object.__setattr__(self, "c1_preset", C1Preset(self.c1_preset))
        if self.k < 2:
            raise DomainError("need at least k = 2 arms")
        if self.T < 1:
            raise DomainError("horizon T must be positive")
        if self.algo is Algo.EXP3 and self.T < math.sqrt(8 * self.k * math.log(self.k)):
            raise DomainError(f"sparse_exp3_spa needs T >= sqrt(8 k log k) = "
                              f"{math.sqrt(8 * self.k * math.log(self.k)):.3f}")
        if self.algo is Algo.BOBW and self.T < 2 * self.k:
            raise DomainError("sparse_bobw needs T >= 2k")
        if self.c1_override is not None and not self.c1_override > 0:
            raise DomainError("c1 override must be positive")


# ---------------------------------------------------------------- estimator pieces


def iw_estimate(loss_observed: float, arm: int, p) -> np.ndarray:
    """Inverse-weighted estimate: loss * 1{i = arm} / p_arm."""
    pv = np.asarray(p, dtype=np.float64)
    if not pv[arm] > 0.0:
        raise DomainError(f"arm {arm} has zero sampling probability")
    out = np.zeros(pv.size)
    out[arm] = loss_observed / pv[arm]
    return out


def omega(loss_observed: float, p_arm: float) -> float:
    return loss_observed * loss_observed / p_arm


def nu(omega_val: float, p_arm: float, eta: float) -> float:
    return omega_val * min(1.0, p_arm / (2.0 * eta))


def exp3_gamma(k: int, T: int) -> float:
    return (k * math.log(k)) ** (1.0 / 3.0) / T ** (2.0 / 3.0)


def default_c1(algo: Algo, k: int, T: int, preset: C1Preset = C1Preset.THEOREM) -> float:
    if algo is Algo.EXP3:
        return 1.0 / math.sqrt(2.0)
    if algo is Algo.LOG_BARRIER:
        return math.sqrt(2.0)
    beta1 = 15.0 * k
    if preset is C1Preset.PROOF:
        return math.sqrt(2.0 * math.log1p(float(T) ** 2 / beta1))
    return math.sqrt(2.0 * math.log1p(T / beta1))


def spa_config(cfg: AgentConfig) -> tuple[SpaConfig, float]:
    """(SpaConfig, h1) for an agent configuration."""
    k, T = cfg.k, cfg.T
    c1 = cfg.c1_override if cfg.c1_override is not None else default_c1(cfg.algo, k, T, cfg.c1_preset)
    logk = math.log(k)
    if cfg.algo is Algo.EXP3:
        g = exp3_gamma(k, T)
        return SpaConfig(c1=c1, c2=0.0, beta1=2 * c1 * math.sqrt(k / g) / math.sqrt(logk), lam=1.0), logk
    if cfg.algo is Algo.LOG_BARRIER:
        return SpaConfig(c1=c1, c2=0.0, beta1=c1 * c1 / (8 * logk), lam=1.0), logk
    return SpaConfig(c1=c1, c2=81.0 * c1 * c1, beta1=15.0 * k, lam=2.0), logk / (1.0 - k / T)


# ---------------------------------------------------------------- agent


@dataclass
class StepRecord:
    """What one update did, and whether each per-round inequality held."""

    beta: float
    beta_next: float
    h: float
    h_next: float
    z: float
    zbar: float
    stability: float
    stability_bound: float
    checks: dict = field(default_factory=dict)


class Agent:
    """Mutable per-episode agent state.

    cum_est_loss is sum_{s<t} y_hat_s; q and p are q_t and p_t.
    """

    def __init__(self, cfg: AgentConfig, history: bool = False, checks: bool = True):
        self.cfg = cfg
        self.algo = cfg.algo
        self.k = cfg.k
        self.T = cfg.T
        self.spa_cfg, self.h1 = spa_config(cfg)
        self.spa = SpaState.initial(self.spa_cfg, self.h1, history=history)
        self.c = cfg.algo.barrier
        self.gamma = {Algo.EXP3: exp3_gamma(cfg.k, cfg.T), Algo.LOG_BARRIER: 0.0,
                      Algo.BOBW: cfg.k / cfg.T}[cfg.algo]
        if self.gamma > 0.5:
            raise DomainError(f"exploration rate {self.gamma} exceeds 1/2")
        self.checks = checks
        self.cum_est_loss = np.zeros(cfg.k)
        self.q = np.full(cfg.k, 1.0 / cfg.k)
        self.p = self._transform(self.q)
        self.h = self._penalty(self.p)
        self.t = 1
        self.mu = math.nan

    # -- pieces

    def _transform(self, q: np.ndarray) -> np.ndarray:
        if self.gamma == 0.0:
            return q
        return (1.0 - self.gamma) * q + self.gamma / self.k

    def _penalty(self, p: np.ndarray) -> float:
        if self.algo is not Algo.BOBW:
            return self.h1
        pos = p[p > 0.0]
        return float(-(pos * np.log(pos)).sum()) / (1.0 - self.k / self.T)

    def _solve(self, L: np.ndarray, beta: float) -> np.ndarray:
        q, mu, _ = solve_q(L, beta, self.c, SOLVE_TOL, relative=True)
        self.mu = mu
        return q

    @property
    def beta(self) -> float:
        return self.spa.beta

    @property
    def eta(self) -> float:
        return 1.0 / self.spa.beta

    @property
    def q_vec(self) -> ProbVector:
        return ProbVector(self.q)

    @property
    def p_vec(self) -> ProbVector:
        return ProbVector(self.p)

    # -- one round

    def step(self, arm: int, loss: float) -> StepRecord:
        lo, hi = self.algo.loss_range.bounds
        if not lo <= loss <= hi:
            raise DomainError(f"observed loss {loss} outside [{lo}, {hi}]")
        k, spa, cfg = self.k, self.spa, self.spa_cfg
        q_t, p_t, beta_t, h_t = self.q, self.p, spa.beta, self.h
        pa = p_t[arm]
        if not pa > 0.0:
            raise DomainError(f"arm {arm} has zero sampling probability")
        y = loss / pa
        w = loss * loss / pa
        checks: dict[str, bool] = {}
        L_next = self.cum_est_loss.copy()
        L_next[arm] += y

        if self.algo is Algo.EXP3:
            z, zbar = w, k / self.gamma
            if self.checks:
                checks["s2"] = check_s2(spa, 2.0, cfg, z=z)
                checks["omega_bound"] = w <= zbar * (1 + 1e-12)
            beta_next = next_beta(spa, z, zbar, cfg)
            q_next = self._solve(L_next, beta_next) if loss != 0.0 else q_t
            h_next = self.h1
            stab_bound = w / beta_t
        elif self.algo is Algo.LOG_BARRIER:
            z = nu(w, pa, 1.0 / beta_t)
            zbar = z
            if self.checks:
                checks["s2"] = check_s2(spa, 0.5, cfg, z=z)
                checks["nu_bound"] = z <= 0.5 * beta_t * loss * loss * (1 + 1e-12)
            beta_next = next_beta(spa, z, zbar, cfg)
            q_next = self._solve(L_next, beta_next) if loss != 0.0 else q_t
            h_next = self.h1
            stab_bound = z / beta_t
        else:
            z = nu(w, pa, 1.0 / beta_t)
            if self.checks:
                checks["nu_bound"] = z <= 0.5 * beta_t * loss * loss * (1 + 1e-12)
            if z == 0.0:
                beta_next, q_next, h_next = beta_t, q_t, h_t
                checks["bisection"] = True
            else:
                cache: dict[float, np.ndarray] = {}

                def h_of(a: float) -> float:
                    qa = self._solve(L_next, a)
                    cache[a] = qa
                    return self._penalty(self._transform(qa))

                root = implicit_update_bisection(spa, z, h_of, self.T, cfg, method=self.cfg.bisection)
                beta_next, h_next = root.beta_next, root.h_next
                q_next = cache[beta_next]
                if self.checks:
                    checks["bisection"] = (abs(root.f_residual) <= 1e-9 * max(1.0, beta_t)
                                           and beta_t <= beta_next <= beta_t + self.T
                                           and beta_next - beta_t <= z / 9.0 * (1 + 1e-12))
            zbar = z * h_next / self.h1
            stab_bound = 2.0 * z / beta_t
            if self.checks:
                checks["s1"] = check_s1(spa, z, zbar, cfg.beta1, cfg)
                ratio = beta_t / beta_next
                checks["f3"] = 0.0 <= 1.0 - ratio <= 0.1
                checks["f4"] = h_next <= (3.0 * h_t + (20.0 * k / 9.0) * (beta_next / beta_t - 1.0)
                                          * math.log(self.T / k) * h_next + CHECK_TOL)
                if z > 0.0:
                    # q at (L_{t+1}, beta_t) versus r = q_{t+1} at (L_{t+1}, beta_{t+1})
                    q_same = self._solve(L_next, beta_t)
                    checks["f1"] = bool(np.all(q_next <= q_same ** ratio + 1e-9))
                    if beta_t >= 15.0 * k:
                        checks["f2"] = bool(np.all(q_next <= 3.0 * q_t ** ratio + 1e-9))

        if self.checks:
            if loss == 0.0:
                stab = 0.0
            else:
                y_vec = np.zeros(k)
                y_vec[arm] = y
                stab = stability_term(q_t, q_next, y_vec, beta_t, self.c)
            checks["stability"] = stab <= stab_bound + CHECK_TOL
        else:
            stab = math.nan

        spa_update(spa, z, zbar, h_next, None, cfg, beta_next=beta_next, validate=self.checks)
        self.cum_est_loss = L_next
        self.q = q_next
        self.p = self._transform(q_next)
        self.h = self._penalty(self.p) if self.algo is Algo.BOBW else self.h1
        if self.checks and self.gamma > 0.0:
            checks["sandwich"] = bool(np.all(2.0 * self.p >= self.q))
        self.t += 1
        return StepRecord(beta_t, beta_next, h_t, h_next, z, zbar, stab, stab_bound, checks)


def agent_step(state: Agent, arm: int, observed_loss: float) -> tuple[Agent, ProbVector]:
    """Functional-style wrapper: advance the agent and return it with p_{t+1}."""
    state.step(arm, observed_loss)
    return state, ProbVector(state.p)


def sample_arm(p: np.ndarray, u: float) -> int:
    """Inverse-CDF sampling on the cumulative vector."""
    cdf = np.cumsum(p)
    i = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    return min(i, p.size - 1)


# ---------------------------------------------------------------- episodes

FLAG_COLUMNS = ("s1_ok", "stab_lemma_ok", "f4_ok", "s2_ok", "f3_ok", "nu_ok",
                "sandwich_ok", "f1_ok", "f2_ok", "bisect_ok", "omega_ok")
_CHECK_TO_COLUMN = {"s1": "s1_ok", "stability": "stab_lemma_ok", "f4": "f4_ok", "s2": "s2_ok",
                    "f3": "f3_ok", "nu_bound": "nu_ok", "sandwich": "sandwich_ok", "f1": "f1_ok",
                    "f2": "f2_ok", "bisection": "bisect_ok", "omega_bound": "omega_ok"}


def episode_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """(environment stream, sampling stream), both counter-based, derived from seed."""
    env_ss, agent_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.Generator(np.random.Philox(env_ss)), np.random.Generator(np.random.Philox(agent_ss))


def run_episode(cfg: AgentConfig, env_spec, T: int | None = None, checks: bool = True,
                history: bool = False):
    """T rounds of sample / observe / update. Returns a RegretTrace.

    Per-round flags are 1 (held), 0 (violated) or -1 (not checked this round).
    """
    from .environments import AdversarialSparse, CorruptedStochastic, EnvState, RegretTrace, gaps, optimal_arm

    T = cfg.T if T is None else T
    if env_spec.k != cfg.k:
        raise DomainError(f"environment has {env_spec.k} arms, agent expects {cfg.k}")
    env_rng, draw_rng = episode_streams(cfg.seed)
    env = EnvState(env_spec, T, env_rng)
    rng_range = env.range
    if cfg.algo is Algo.EXP3 and rng_range is not LossRange.UNIT:
        raise DomainError("sparse_exp3_spa needs losses in [0, 1]")
    agent = Agent(cfg, history=history, checks=checks)
    k = cfg.k
    adversarial = isinstance(env_spec, AdversarialSparse)
    corrupted = isinstance(env_spec, CorruptedStochastic)
    g = None if adversarial else gaps(env_spec)
    a_star = optimal_arm(env_spec)

    cols = {
        "t": np.arange(1, T + 1, dtype=np.int64),
        "A_t": np.zeros(T, dtype=np.int64),
        "loss_observed": np.zeros(T),
        "regret_cum": np.zeros(T),
        "beta": np.zeros(T),
        "h": np.zeros(T),
        "z": np.zeros(T),
        "zbar": np.zeros(T),
        "stability": np.zeros(T),
        "stab_bound": np.zeros(T),
        "sq_norm": np.zeros(T),
        "nnz": np.zeros(T, dtype=np.int64),
    }
    for name in FLAG_COLUMNS:
        cols[name] = np.full(T, -1, dtype=np.int8)
    pulls = np.zeros(k, dtype=np.int64)
    cum_loss = np.zeros(k)
    learner_loss = 0.0
    regret = 0.0
    sum_omega = 0.0
    uniforms = draw_rng.random(T)
    error = None
    for i in range(T):
        t = i + 1
        loss_vec = env.generate_round(t, pulls if env_spec_is_adaptive(env_spec) else None)
        arm = sample_arm(agent.p, uniforms[i])
        loss = float(loss_vec[arm])
        pa = agent.p[arm]
        sum_omega += loss * loss / pa
        try:
            rec = agent.step(arm, loss)
        except Exception as exc:  # recorded, not raised: the episode status carries it
            error = f"round {t}: {type(exc).__name__}: {exc}"
            cols = {name: col[:i] for name, col in cols.items()}
            break
        pulls[arm] += 1
        if adversarial:
            cum_loss += loss_vec
            learner_loss += loss
            regret = learner_loss - float(cum_loss.min())
        else:
            regret += g[arm]
            if corrupted:
                d = env.last_deviation
                regret += d[arm] - d[a_star]
        cols["A_t"][i] = arm
        cols["loss_observed"][i] = loss
        cols["regret_cum"][i] = regret
        cols["beta"][i] = rec.beta
        cols["h"][i] = rec.h
        cols["z"][i] = rec.z
        cols["zbar"][i] = rec.zbar
        cols["stability"][i] = rec.stability
        cols["stab_bound"][i] = rec.stability_bound
        cols["sq_norm"][i] = float(loss_vec @ loss_vec)
        cols["nnz"][i] = int(np.count_nonzero(loss_vec))
        for key, ok in rec.checks.items():
            cols[_CHECK_TO_COLUMN[key]][i] = 1 if ok else 0

    totals = {
        "algo": cfg.algo.value, "k": k, "T": T, "seed": int(cfg.seed),
        "L2": float(cols["sq_norm"].sum()),
        "sum_omega": sum_omega,
        "sum_z": float(cols["z"].sum()),
        "final_regret": float(cols["regret_cum"][-1]) if cols["regret_cum"].size else 0.0,
        "beta_final": float(agent.beta),
        "beta1": float(agent.spa_cfg.beta1),
        "c1": float(agent.spa_cfg.c1),
        "max_nnz": int(cols["nnz"].max()) if cols["nnz"].size else 0,
        "corruption_used": float(env.corruption_used),
        "error": error,
    }
    trace = RegretTrace(cols, totals)
    trace.totals["violations"] = trace.violations()
    trace.totals["status"] = trace.status
    if history:
        trace.spa_state = agent.spa
    return trace


def env_spec_is_adaptive(spec) -> bool:
    return getattr(spec, "adaptive", False)
