"""Closed-form regret bounds used as certificates.

Constants that a theorem hides inside O(.) are spelled out here from the explicit
terms of the corresponding argument and frozen as module constants.
"""
from __future__ import annotations

import math

import numpy as np

# Multiplier of k log T covering 2k + 4k log T + 15k log k + 9 c1 K for the
# best-of-both-worlds agent at (k, T) = (8, 1e4) with the default c1, where
# K = 2 (c1 + (2/c1) log(1 + T^2/beta1)); see bobw_additive_terms.
C_IMPL = 17.0

# Multiplier of B sqrt(log k log(1+T)) in the partial-monitoring certificate:
# 1 + 2 sqrt(2 Vbar) / B, maximized over the three models (full information gives 5).
C_B = 5.0


def exp3_bound(L2: float, k: int, T: int) -> float:
    """2 sqrt(2) sqrt(L2 log k) + (2 sqrt(2) + 1) (k T log k)^(1/3)."""
    lk = math.log(k)
    return 2 * math.sqrt(2) * math.sqrt(L2 * lk) + (2 * math.sqrt(2) + 1) * (k * T * lk) ** (1 / 3)


def log_barrier_bound(L2: float, k: int, T: int) -> float:
    """4 sqrt(2) sqrt(L2 log k) + 2 k log T + k + 1/4."""
    return 4 * math.sqrt(2) * math.sqrt(L2 * math.log(k)) + 2 * k * math.log(T) + k + 0.25


def bobw_K(c1: float, k: int, T: int) -> float:
    """2 (c1 + (2/c1) log(1 + T^2 / beta1)) with beta1 = 15k: the factor in front of
    sqrt(c2 + sum nu h) in the penalty+stability bound, using nu_t <= T."""
    beta1 = 15.0 * k
    return 2.0 * (c1 + 2.0 / c1 * math.log1p(float(T) ** 2 / beta1))


def bobw_additive_terms(c1: float, k: int, T: int) -> float:
    """2k + 4k log T + 15k log k (barrier, exploration and initial penalty) plus the
    sqrt(c2) = 9 c1 contribution K * 9 c1."""
    return 2 * k + 4 * k * math.log(T) + 15 * k * math.log(k) + bobw_K(c1, k, T) * 9.0 * c1


def bobw_adversarial_bound(L2: float, k: int, T: int, c_impl: float = C_IMPL) -> float:
    """4 sqrt(L2 log k log(1+T)) + C_impl k log T."""
    return 4 * math.sqrt(L2 * math.log(k) * math.log1p(T)) + c_impl * k * math.log(T)


def bobw_self_bounding_bound(k: int, T: int, s: float, delta_min: float, corruption: float,
                             c1: float) -> float:
    """Fully explicit stochastic / corrupted bound assembled from the argument's terms.

    With K = bobw_K(c1, k, T), a = 2 K sqrt(6 s log(kT)) and
    D = K (9 c1 + (20k/9) log(T/k)) + 2k + 4k log T + 15k log k, the regret obeys
    Reg <= a sqrt(P) + D and Reg >= delta_min P - corruption, where P is the expected
    number of suboptimal draws. Eliminating P for lam in (0, 1] gives
    (1+lam)^2 a^2 / (4 lam delta_min) + (1+lam) D + lam * corruption; the small-P case
    gives a sqrt(e) + D. Pass corruption = 2C for a C-corrupted stochastic environment.
    """
    K = bobw_K(c1, k, T)
    a = 2.0 * K * math.sqrt(6.0 * s * math.log(k * T))
    D = K * (9.0 * c1 + 20.0 * k / 9.0 * math.log(T / k)) + 2 * k + 4 * k * math.log(T) + 15 * k * math.log(k)
    lam = np.linspace(1e-3, 1.0, 2000)
    sb = float(np.min((1 + lam) ** 2 * a * a / (4 * lam * delta_min) + (1 + lam) * D + lam * corruption))
    return max(a * math.sqrt(math.e) + D, sb)


def pm_certificate(sum_vprime: float, k: int, T: int) -> float:
    """sqrt(2 sum_t V'_t log k log(1+T))."""
    return math.sqrt(2.0 * sum_vprime * math.log(k) * math.log1p(T))


def pm_additive(B: float, k: int, T: int, c_b: float = C_B) -> float:
    return c_b * B * math.sqrt(math.log(k) * math.log1p(T))
