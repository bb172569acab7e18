"""Stability-penalty-adaptive (SPA) learning rates.

The inverse learning rate evolves as

    beta_{t+1} = beta_t + c1 * z_t / sqrt(c2 + zbar_t * h1 + sum_{s<t} z_s h_{s+1}),

where z_t is a stability component and h_{t+1} a penalty component. The regret proxy
sum_t (beta_{t+1} - beta_t) h_{t+1} + lam * sum_t z_t / beta_t is certified by

    (I)  2 (c1 + lam/c1 * log(1 + sum z / eps)) * sqrt(c2 + zbar_T h1 + sum z_t h_{t+1})
    (II) 2 (c1 + lam/(a c1)) * sqrt(h1 * sum z)      (h constant, c2 = 0)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

# relative slack used when validating the sequence conditions
REL_TOL = 1e-12


class SequenceConditionViolation(ValueError):
    """One of the sequence conditions on (z, zbar, h) failed."""

    def __init__(self, condition: str, lhs: float, rhs: float, t: int):
        super().__init__(f"round {t}: {condition} violated ({lhs!r} vs {rhs!r})")
        self.condition = condition
        self.lhs = lhs
        self.rhs = rhs
        self.t = t


class BisectionError(RuntimeError):
    """F_t has no sign change on [beta_t, beta_t + T]."""

    def __init__(self, msg: str, f_lo: float, f_hi: float):
        super().__init__(msg)
        self.f_lo = f_lo
        self.f_hi = f_hi


@dataclass(frozen=True)
class SpaConfig:
    c1: float
    c2: float
    beta1: float
    lam: float = 1.0

    def __post_init__(self) -> None:
        if not (self.c1 > 0 and self.beta1 > 0 and self.c2 >= 0 and self.lam > 0):
            raise ValueError(f"invalid SPA configuration {self!r}")


@dataclass
class SpaHistory:
    z: list = field(default_factory=list)
    zbar: list = field(default_factory=list)
    h_next: list = field(default_factory=list)
    beta: list = field(default_factory=list)
    eta_z: list = field(default_factory=list)
    penalty: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.z)

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: np.asarray(getattr(self, name), dtype=np.float64)
                for name in ("z", "zbar", "h_next", "beta", "eta_z", "penalty")}


@dataclass
class SpaState:
    """beta_t and the running sums behind the update.

    The state is owned by one episode and advanced in place by spa_update, which
    validates every condition before touching any field.
    """

    beta: float
    h1: float
    t: int = 1
    sum_zh: float = 0.0
    sum_z: float = 0.0
    last_zbar: float = 0.0
    last_radicand: float = -math.inf
    history: SpaHistory | None = None

    @classmethod
    def initial(cls, cfg: SpaConfig, h1: float, history: bool = False) -> "SpaState":
        if not h1 > 0:
            raise ValueError("h1 must be positive")
        return cls(beta=cfg.beta1, h1=float(h1), history=SpaHistory() if history else None)

    @property
    def eta(self) -> float:
        return 1.0 / self.beta


def radicand(state: SpaState, zbar: float, cfg: SpaConfig, h1: float | None = None) -> float:
    h1 = state.h1 if h1 is None else h1
    return cfg.c2 + zbar * h1 + state.sum_zh


def next_beta(state: SpaState, z: float, zbar: float, cfg: SpaConfig, h1: float | None = None) -> float:
    """The explicit update; h_{t+1} does not enter it."""
    if z == 0.0:
        return state.beta
    return state.beta + cfg.c1 * z / math.sqrt(radicand(state, zbar, cfg, h1))


def check_sequence_conditions(state: SpaState, z: float, zbar: float, h_next: float,
                              cfg: SpaConfig, h1: float | None = None) -> None:
    """Raise SequenceConditionViolation if round t breaks a condition.

    Checked: z, zbar >= 0; h1 >= h_{t+1}; zbar_t h1 >= z_t h_{t+1}; the radicand
    c2 + zbar_t h1 + sum_{s<t} z_s h_{s+1} is non-decreasing in t and positive
    whenever z_t > 0.
    """
    h1 = state.h1 if h1 is None else h1
    t = state.t
    if z < 0 or zbar < 0 or h_next < 0:
        raise SequenceConditionViolation("z, zbar, h nonnegative", min(z, zbar, h_next), 0.0, t)
    if h_next > h1 * (1 + REL_TOL):
        raise SequenceConditionViolation("h1 >= h_{t+1}", h1, h_next, t)
    if zbar * h1 < z * h_next * (1 - REL_TOL):
        raise SequenceConditionViolation("zbar_t h1 >= z_t h_{t+1}", zbar * h1, z * h_next, t)
    rad = radicand(state, zbar, cfg, h1)
    if rad < state.last_radicand * (1 - REL_TOL) - 1e-300:
        raise SequenceConditionViolation("radicand non-decreasing", rad, state.last_radicand, t)
    if z > 0 and not rad > 0:
        raise SequenceConditionViolation("c2 + zbar_t h1 + sum z h > 0", rad, 0.0, t)


def spa_update(state: SpaState, z: float, zbar: float, h_next: float, h1: float | None,
               cfg: SpaConfig, beta_next: float | None = None, validate: bool = True,
               root_tol: float = 1e-9) -> SpaState:
    """Advance one round.

    beta_next may be supplied when beta_{t+1} was found as a fixed point (h_{t+1}
    depending on beta_{t+1}); it must agree with the explicit formula evaluated at the
    supplied h_{t+1} to within root_tol * max(1, beta_t).
    """
    h1 = state.h1 if h1 is None else float(h1)
    if validate:
        check_sequence_conditions(state, z, zbar, h_next, cfg, h1)
    formula = next_beta(state, z, zbar, cfg, h1)
    if beta_next is None:
        beta_next = formula
    elif validate and abs(beta_next - formula) > root_tol * max(1.0, state.beta):
        raise SequenceConditionViolation("beta_{t+1} matches the update", beta_next, formula, state.t)
    if beta_next < state.beta:
        raise SequenceConditionViolation("beta non-decreasing", beta_next, state.beta, state.t)
    if state.history is not None:
        hist = state.history
        hist.z.append(z)
        hist.zbar.append(zbar)
        hist.h_next.append(h_next)
        hist.beta.append(state.beta)
        hist.eta_z.append(z / state.beta)
        hist.penalty.append((beta_next - state.beta) * h_next)
    state.last_radicand = max(state.last_radicand, radicand(state, zbar, cfg, h1))
    state.last_zbar = zbar
    state.sum_zh += z * h_next
    state.sum_z += z
    state.beta = beta_next
    state.t += 1
    return state


def check_s1(state: SpaState, z: float, zbar: float, epsilon: float, cfg: SpaConfig,
             h1: float | None = None) -> bool:
    """(sqrt(c2 + zbar_t h1) / c1) (beta_1 + beta_t) >= eps + z_t."""
    h1 = state.h1 if h1 is None else h1
    lhs = math.sqrt(cfg.c2 + zbar * h1) / cfg.c1 * (cfg.beta1 + state.beta)
    return lhs >= (epsilon + z) * (1 - REL_TOL)


def check_s2(state: SpaState, a: float, cfg: SpaConfig, z: float = 0.0,
             h1: float | None = None) -> bool:
    """beta_t >= (a c1 / sqrt(h1)) sqrt(sum_{s<=t} z_s); z is the current round's z_t."""
    h1 = state.h1 if h1 is None else h1
    rhs = a * cfg.c1 / math.sqrt(h1) * math.sqrt(state.sum_z + z)
    return state.beta >= rhs * (1 - REL_TOL)


def _hist(state: SpaState) -> dict[str, np.ndarray]:
    if state.history is None:
        raise ValueError("SPA history logging is disabled for this state")
    return state.history.arrays()


def reghat_sp(state: SpaState, cfg: SpaConfig) -> float:
    h = _hist(state)
    return float(h["penalty"].sum() + cfg.lam * h["eta_z"].sum())


def bound_certificate_I(state: SpaState, epsilon: float, cfg: SpaConfig) -> float:
    h = _hist(state)
    zsum = float(h["z"].sum())
    zbar_T = float(h["zbar"][-1]) if len(h["zbar"]) else 0.0
    root = math.sqrt(max(cfg.c2 + zbar_T * state.h1 + float((h["z"] * h["h_next"]).sum()), 0.0))
    return 2.0 * (cfg.c1 + cfg.lam / cfg.c1 * math.log1p(zsum / epsilon)) * root


def bound_certificate_II(state: SpaState, a: float, cfg: SpaConfig) -> float:
    h = _hist(state)
    return 2.0 * (cfg.c1 + cfg.lam / (a * cfg.c1)) * math.sqrt(state.h1 * float(h["z"].sum()))


@dataclass(frozen=True)
class ImplicitRoot:
    beta_next: float
    f_residual: float
    iterations: int
    h_next: float


def implicit_update_bisection(state: SpaState, nu: float, evaluate_h_next: Callable[[float], float],
                              T: float, cfg: SpaConfig, tol: float = 1e-9, max_iter: int = 200,
                              method: str = "illinois") -> ImplicitRoot:
    """Root of F(a) = a - (beta_t + c1 nu / sqrt(c2 + nu h_{t+1}(a) + sum_{s<t} z_s h_{s+1}))
    on [beta_t, beta_t + T].

    Both methods keep a sign bracket [lo, hi] with F(lo) < 0 < F(hi). "bisection"
    halves it every step; "illinois" takes the modified false-position point, falling
    back to the midpoint whenever the bracket fails to halve over two steps.
    """
    b = state.beta
    if nu == 0.0:
        return ImplicitRoot(b, 0.0, 0, math.nan)
    if method not in ("illinois", "bisection"):
        raise ValueError(f"unknown root-finding method {method!r}")

    def F(a: float) -> tuple[float, float]:
        h = evaluate_h_next(a)
        return a - (b + cfg.c1 * nu / math.sqrt(cfg.c2 + nu * h + state.sum_zh)), h

    target = tol * max(1.0, b)
    lo, hi = b, b + T
    f_lo, h_lo = F(lo)
    if abs(f_lo) <= target:
        return ImplicitRoot(lo, f_lo, 1, h_lo)
    f_hi, h_hi = F(hi)
    if not (f_lo < 0.0 < f_hi):
        raise BisectionError(f"no sign change on [{lo}, {hi}]: F = ({f_lo}, {f_hi})", f_lo, f_hi)
    best = (lo, f_lo, h_lo) if abs(f_lo) < abs(f_hi) else (hi, f_hi, h_hi)
    side = 0
    width_prev = hi - lo
    for it in range(1, max_iter + 1):
        if method == "bisection" or it % 2 == 0 and (hi - lo) > 0.5 * width_prev:
            a = 0.5 * (lo + hi)
        else:
            a = (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
            if not lo < a < hi:
                a = 0.5 * (lo + hi)
        if it % 2 == 0:
            width_prev = hi - lo
        fa, ha = F(a)
        if abs(fa) < abs(best[1]):
            best = (a, fa, ha)
        if abs(fa) <= target:
            return ImplicitRoot(a, fa, it + 2, ha)
        if fa < 0.0:
            lo, f_lo = a, fa
            if side == -1 and method == "illinois":
                f_hi *= 0.5
            side = -1
        else:
            hi, f_hi = a, fa
            if side == 1 and method == "illinois":
                f_lo *= 0.5
            side = 1
        if hi - lo <= 4e-16 * hi:
            break
    a, fa, ha = best
    raise BisectionError(f"iteration cap reached with |F| = {abs(fa):.3e} at {a}", f_lo, f_hi)
