"""Loss generators for the adversarial, stochastic and corrupted-stochastic regimes,
together with L2 and regret accounting.

Generators stream one round at a time. Random draws are taken from the episode's
generator in fixed-size blocks, so memory does not grow with T.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .simplex import DomainError, LossRange

BLOCK = 1024


class Pattern(enum.Enum):
    FIXED = "fixed"
    ROTATING = "rotating"
    RANDOM = "random"
    ADAPTIVE = "adaptive"   # support follows the learner's most-pulled arm


class Noise(enum.Enum):
    BERNOULLI = "bernoulli"
    UNIFORM_AROUND = "uniform_around"


class Schedule(enum.Enum):
    FRONT = "front"
    SPREAD = "spread"


@dataclass(frozen=True)
class AdversarialSparse:
    """At most s nonzero losses per round.

    In-support values are uniform on the loss range, except that arm 0 draws from
    the lower half of the range, so a best arm exists in hindsight. For the random
    pattern arm 0 also enters the support with weight best_arm_weight relative to
    the other arms.
    """

    k: int
    s: int
    range: LossRange = LossRange.UNIT
    pattern: Pattern = Pattern.RANDOM
    pattern_seed: int | None = None
    best_arm_weight: float = 0.5

    def __post_init__(self) -> None:
        if isinstance(self.range, str):
            object.__setattr__(self, "range", LossRange(self.range))
        if isinstance(self.pattern, str):
            object.__setattr__(self, "pattern", Pattern(self.pattern))
        if not 0 <= self.s <= self.k:
            raise DomainError(f"sparsity s={self.s} must lie in [0, k={self.k}]")
        if not self.best_arm_weight > 0:
            raise DomainError("best_arm_weight must be positive")

    @property
    def adaptive(self) -> bool:
        return self.pattern is Pattern.ADAPTIVE


def _check_means(means: tuple) -> np.ndarray:
    mu = np.asarray(means, dtype=np.float64)
    if mu.ndim != 1 or mu.size < 2:
        raise DomainError("need at least two arm means")
    if np.any(np.abs(mu) > 1.0):
        raise DomainError("means must lie in [-1, 1]")
    best = mu.min()
    if np.count_nonzero(mu == best) != 1:
        raise DomainError("the optimal arm must be unique")
    return mu


@dataclass(frozen=True)
class StochasticSparse:
    """i.i.d. losses; arms with mean 0 always return 0, so sparsity is the number of
    nonzero means.

    Bernoulli: loss = sign(mu) with probability |mu|, else 0.
    Uniform-around: loss = mu + U(-r, r), r = min(|mu|, 1 - |mu|), which keeps the
    sign and the mean.
    """

    means: tuple
    noise: Noise = Noise.BERNOULLI

    def __post_init__(self) -> None:
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))
        if isinstance(self.noise, str):
            object.__setattr__(self, "noise", Noise(self.noise))
        _check_means(self.means)

    @property
    def k(self) -> int:
        return len(self.means)


@dataclass(frozen=True)
class CorruptedStochastic:
    """A stochastic environment whose optimal arm's loss is pushed upward, in total by at
    most C in sup-norm over the run.

    front: corrupt from round 1 on until the budget is spent.
    spread: corrupt one unit every floor(T / C) rounds.
    """

    means: tuple
    C: float
    schedule: Schedule = Schedule.FRONT
    noise: Noise = Noise.BERNOULLI

    def __post_init__(self) -> None:
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))
        if isinstance(self.schedule, str):
            object.__setattr__(self, "schedule", Schedule(self.schedule))
        if isinstance(self.noise, str):
            object.__setattr__(self, "noise", Noise(self.noise))
        if not self.C >= 0:
            raise DomainError("corruption budget must be nonnegative")
        _check_means(self.means)

    @property
    def k(self) -> int:
        return len(self.means)


EnvSpec = AdversarialSparse | StochasticSparse | CorruptedStochastic


def env_range(spec: EnvSpec) -> LossRange:
    if isinstance(spec, AdversarialSparse):
        return spec.range
    mu = np.asarray(spec.means)
    if isinstance(spec, CorruptedStochastic) or np.any(mu < 0):
        return LossRange.SYMMETRIC
    return LossRange.UNIT


def optimal_arm(spec: EnvSpec) -> int | None:
    if isinstance(spec, AdversarialSparse):
        return None
    return int(np.argmin(spec.means))


def gaps(spec: EnvSpec) -> np.ndarray:
    mu = np.asarray(spec.means)
    return mu - mu.min()


class EnvState:
    """Per-episode generator. generate_round(t, pulls) returns the loss vector of
    round t; pulls is the per-arm pull count over rounds s < t and is read only by
    the adaptive pattern."""

    def __init__(self, spec: EnvSpec, T: int, rng: np.random.Generator):
        self.spec = spec
        self.T = T
        self.k = spec.k
        self.range = env_range(spec)
        self.rng = rng
        if isinstance(spec, AdversarialSparse) and spec.pattern_seed is not None:
            self.rng = np.random.Generator(np.random.Philox(spec.pattern_seed))
        self.corruption_left = float(spec.C) if isinstance(spec, CorruptedStochastic) else 0.0
        self.corruption_used = 0.0
        self.last_deviation = np.zeros(self.k)
        self._weights = None
        if isinstance(spec, AdversarialSparse):
            w = np.ones(self.k)
            w[0] = spec.best_arm_weight
            self._weights = w / w.sum()

    # Draws come in blocks so the streams stay a pure function of the seed while the
    # per-round cost stays small; oblivious variants build the whole block at once.
    def _refill(self, t: int) -> None:
        n = min(BLOCK, self.T - t + 1)
        k = self.k
        self._block_start = t
        uv = self.rng.random((n, k))
        us = self.rng.random((n, k))
        spec = self.spec
        if isinstance(spec, AdversarialSparse):
            if spec.adaptive:
                self._u_vals, self._u_supp = uv, us
                self._block = None
            else:
                self._block = self._adversarial_block(np.arange(t, t + n), uv, us)
        else:
            self._block = self._stochastic(np.asarray(spec.means), spec.noise, uv)

    def _row(self, t: int) -> int:
        if not hasattr(self, "_block_start") or not 0 <= t - self._block_start < BLOCK \
                or t - self._block_start >= self._block_len():
            self._refill(t)
        return t - self._block_start

    def _block_len(self) -> int:
        return self._u_vals.shape[0] if self._block is None else self._block.shape[0]

    def generate_round(self, t: int, pulls: np.ndarray | None = None) -> np.ndarray:
        if not 1 <= t <= self.T:
            raise DomainError(f"round {t} outside 1..{self.T}")
        i = self._row(t)
        spec = self.spec
        if self._block is None:
            return self._adaptive(self._u_vals[i], self._u_supp[i], pulls)
        base = self._block[i]
        if isinstance(spec, CorruptedStochastic):
            self.last_deviation[:] = 0.0
            if self.corruption_left > 0.0:
                if spec.schedule is Schedule.FRONT:
                    hit = True
                else:
                    period = max(1, int(self.T // max(spec.C, 1e-300)))
                    hit = t % period == 0
                if hit:
                    a = int(np.argmin(spec.means))
                    dev = min(self.corruption_left, 1.0 - base[a])
                    base = base.copy()
                    base[a] += dev
                    self.last_deviation[a] = dev
                    self.corruption_left -= dev
                    self.corruption_used += dev
        return base

    @staticmethod
    def _stochastic(mu: np.ndarray, noise: Noise, uv: np.ndarray) -> np.ndarray:
        if noise is Noise.BERNOULLI:
            return np.where(uv < np.abs(mu), np.sign(mu), 0.0)
        r = np.minimum(np.abs(mu), 1.0 - np.abs(mu))
        return np.where(mu != 0.0, mu + r * (2.0 * uv - 1.0), 0.0)

    def _values(self, uv: np.ndarray, arm_is_best: np.ndarray) -> np.ndarray:
        lo, hi = self.spec.range.bounds
        mid = 0.5 * (lo + hi)
        return np.where(arm_is_best, lo + (mid - lo) * uv, lo + (hi - lo) * uv)

    def _adversarial_block(self, ts: np.ndarray, uv: np.ndarray, us: np.ndarray) -> np.ndarray:
        spec = self.spec
        n, k, s = uv.shape[0], self.k, spec.s
        out = np.zeros((n, k))
        if s == 0:
            return out
        rows = np.arange(n)[:, None]
        if spec.pattern is Pattern.FIXED:
            supp = np.broadcast_to(np.arange(k - s, k), (n, s))
        elif spec.pattern is Pattern.ROTATING:
            supp = (np.arange(s)[None, :] + ts[:, None]) % k
        else:
            # weighted sampling without replacement via an exponential race
            keys = -np.log(us) / self._weights
            supp = np.argpartition(keys, s - 1, axis=1)[:, :s]
        vals = self._values(uv[rows, supp], supp == 0)
        out[rows, supp] = vals
        return out

    def _adaptive(self, uv: np.ndarray, us: np.ndarray, pulls) -> np.ndarray:
        k, s = self.k, self.spec.s
        out = np.zeros(k)
        if s == 0:
            return out
        lead = int(np.argmax(pulls)) if pulls is not None and np.any(pulls) else 0
        others = np.delete(np.arange(k), lead)
        rest = others[np.argsort(us[others])[: s - 1]]
        supp = np.concatenate(([lead], rest))
        lo, hi = self.spec.range.bounds
        vals = lo + (hi - lo) * uv[supp]
        vals[0] = hi - 0.25 * (hi - lo) * uv[supp[0]]
        out[supp] = vals
        return out


def l2_of(losses) -> float:
    """sum_t ||l_t||^2."""
    arr = np.asarray(losses, dtype=np.float64)
    return float((arr * arr).sum())


def pseudo_regret(actions, losses, spec: EnvSpec | None = None, deviations=None) -> float:
    """Adversarial: sum_t l_{t,A_t} - min_a sum_t l_{t,a}.
    Stochastic (spec given): sum_t (mu_{A_t} - mu_*), plus the realized corruption
    difference sum_t (d_{t,A_t} - d_{t,a*}) for corrupted environments."""
    A = np.asarray(actions, dtype=np.int64)
    if spec is None or isinstance(spec, AdversarialSparse):
        Lm = np.asarray(losses, dtype=np.float64)
        if Lm.size == 0:
            return 0.0
        return float(Lm[np.arange(A.size), A].sum() - Lm.sum(axis=0).min())
    g = gaps(spec)
    out = float(g[A].sum())
    if deviations is not None:
        D = np.asarray(deviations, dtype=np.float64)
        a = optimal_arm(spec)
        out += float(D[np.arange(A.size), A].sum() - D[:, a].sum())
    return out


@dataclass
class RegretTrace:
    """Per-round columns plus episode totals."""

    columns: dict[str, np.ndarray]
    totals: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return int(self.columns["t"].size)

    def violations(self) -> dict[str, int]:
        out = {}
        for name, col in self.columns.items():
            if name.endswith("_ok"):
                # -1 marks "not applicable this round"
                out[name] = int(np.count_nonzero(col == 0))
        return out

    @property
    def status(self) -> int:
        return 0 if sum(self.violations().values()) == 0 and not self.totals.get("error") else 1


def shifted_sparsity(loss: np.ndarray) -> int:
    """||(l + 1) / 2||_0: shifting a symmetric-range loss into [0, 1] fills every zero."""
    return int(np.count_nonzero((np.asarray(loss) + 1.0) / 2.0))


def stochastic_sparsity(spec: StochasticSparse | CorruptedStochastic) -> int:
    return int(np.count_nonzero(np.asarray(spec.means)))


def expected_sq_norm(spec: StochasticSparse | CorruptedStochastic) -> float:
    """E ||l_t||^2 for the uncorrupted stochastic losses."""
    mu = np.abs(np.asarray(spec.means))
    if spec.noise is Noise.BERNOULLI:
        return float(mu.sum())
    r = np.minimum(mu, 1.0 - mu)
    return float((mu * mu + np.where(mu != 0, r * r / 3.0, 0.0)).sum())


__all__ = [
    "AdversarialSparse", "StochasticSparse", "CorruptedStochastic", "EnvSpec", "EnvState",
    "Pattern", "Noise", "Schedule", "RegretTrace", "l2_of", "pseudo_regret", "env_range",
    "optimal_arm", "gaps", "shifted_sparsity", "stochastic_sparsity", "expected_sq_norm",
]
