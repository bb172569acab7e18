from __future__ import annotations

import copy
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spa_ftrl.spa import (BisectionError, SequenceConditionViolation, SpaConfig, SpaState, bound_certificate_I,
                          bound_certificate_II, check_s1, check_s2, check_sequence_conditions,
                          implicit_update_bisection, reghat_sp, spa_update)

from .oracles import bobw_F, bobw_h, bobw_rounds, grid_root_cells, reference_beta_path, spa_sequence


def test_config_validation():
    with pytest.raises(ValueError):
        SpaConfig(c1=0.0, c2=0.0, beta1=1.0)
    with pytest.raises(ValueError):
        SpaConfig(c1=1.0, c2=-1.0, beta1=1.0)
    with pytest.raises(ValueError):
        SpaConfig(c1=1.0, c2=0.0, beta1=1.0, lam=0.0)


def test_update_examples():
    cfg = SpaConfig(c1=1.0, c2=0.0, beta1=1.0)
    st_ = SpaState.initial(cfg, h1=1.0)
    spa_update(st_, 0.0, 1.0, 1.0, None, cfg)
    assert st_.beta == 1.0 and st_.sum_zh == 0.0 and st_.sum_z == 0.0
    st_ = SpaState.initial(cfg, h1=1.0)
    spa_update(st_, 1.0, 1.0, 1.0, None, cfg)
    assert st_.beta == 2.0


def test_violations_leave_state_untouched():
    cfg = SpaConfig(c1=1.0, c2=0.0, beta1=1.0)
    cases = [
        (1.0, 1.0, 2.0),    # h_{t+1} > h1
        (2.0, 1.0, 1.0),    # zbar h1 < z h_{t+1}
        (-1.0, 1.0, 1.0),   # negative z
        (1.0, 0.0, 0.0),    # radicand zero with z > 0
    ]
    for z, zbar, h in cases:
        s = SpaState.initial(cfg, h1=1.0)
        before = copy.deepcopy(s)
        with pytest.raises(SequenceConditionViolation):
            spa_update(s, z, zbar, h, None, cfg)
        assert s == before


def test_decreasing_radicand_is_rejected():
    cfg = SpaConfig(c1=1.0, c2=0.0, beta1=1.0)
    s = SpaState.initial(cfg, h1=1.0)
    spa_update(s, 1.0, 2.0, 0.0, None, cfg)
    with pytest.raises(SequenceConditionViolation) as exc:
        check_sequence_conditions(s, 0.5, 1.0, 0.5, cfg)
    assert "radicand" in exc.value.condition


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1), st.integers(1, 200))
def test_update_matches_direct_summation(seed, T):
    rng = np.random.default_rng(seed)
    h1, c1, c2, beta1 = 1.3, 0.8, float(rng.uniform(0, 2)), float(rng.uniform(0.5, 5))
    z, zbar, h = spa_sequence(rng, T, h1, c1, c2, beta1)
    cfg = SpaConfig(c1=c1, c2=c2, beta1=beta1)
    s = SpaState.initial(cfg, h1)
    betas = [s.beta]
    for t in range(T):
        if z[t] > 0 and c2 + zbar[t] * h1 + s.sum_zh <= 0:
            return
        spa_update(s, z[t], zbar[t], h[t], None, cfg)
        betas.append(s.beta)
    ref = reference_beta_path(z, zbar, h, h1, c1, c2, beta1)
    assert np.allclose(betas, ref, rtol=1e-12, atol=0)
    assert np.all(np.diff(betas) >= 0)
    assert s.sum_z == pytest.approx(z.sum(), rel=1e-12, abs=1e-300)


def test_s1_examples():
    cfg = SpaConfig(c1=1.0, c2=0.01, beta1=1.0)
    s = SpaState.initial(cfg, h1=1.0)
    assert not check_s1(s, 10.0, 0.0, 1.0, cfg)
    cfg2 = SpaConfig(c1=1.0, c2=1.0, beta1=1.0)
    assert check_s1(SpaState.initial(cfg2, h1=1.0), 0.0, 0.0, 1.0, cfg2)


def test_s2_examples():
    cfg = SpaConfig(c1=1.0, c2=0.0, beta1=1.0)
    s = SpaState.initial(cfg, h1=1.0)
    assert check_s2(s, 1.0, cfg)
    s.sum_z = 4.0
    assert not check_s2(s, 1.0, cfg)


def test_reghat_examples():
    cfg = SpaConfig(c1=1.0, c2=0.0, beta1=1.0)
    s = SpaState.initial(cfg, h1=1.0, history=True)
    spa_update(s, 0.0, 0.0, 1.0, None, cfg)
    assert reghat_sp(s, cfg) == 0.0
    s = SpaState.initial(cfg, h1=1.0, history=True)
    spa_update(s, 1.0, 1.0, 1.0, None, cfg)
    assert s.beta == 2.0 and reghat_sp(s, cfg) == 2.0
    with pytest.raises(ValueError):
        reghat_sp(SpaState.initial(cfg, h1=1.0), cfg)


def test_certificate_examples():
    cfg = SpaConfig(c1=1.0, c2=0.0, beta1=1.0)
    s = SpaState.initial(cfg, h1=1.0, history=True)
    spa_update(s, 0.0, 0.0, 1.0, None, cfg)
    assert bound_certificate_I(s, 1.0, cfg) == 0.0
    s = SpaState.initial(cfg, h1=1.0, history=True)
    spa_update(s, 1.0, 1.0, 1.0, None, cfg)
    hand = 2 * (1 + math.log(2)) * math.sqrt(2)
    assert bound_certificate_I(s, 1.0, cfg) == pytest.approx(hand, abs=1e-14)
    assert hand == pytest.approx(4.788, abs=1e-3)


def test_certificate_I_on_random_sequences():
    rng = np.random.default_rng(42)
    accepted = 0
    for _ in range(1000):
        T = int(rng.integers(1, 101))
        h1 = float(rng.uniform(1.0, 3.0))
        c1 = float(rng.uniform(0.5, 2.0))
        c2 = float(rng.uniform(0.0, 1.0))
        beta1 = float(rng.uniform(1.0, 10.0))
        lam = float(rng.choice([1.0, 2.0]))
        cfg = SpaConfig(c1=c1, c2=c2, beta1=beta1, lam=lam)
        z, zbar, h = spa_sequence(rng, T, h1, c1, c2, beta1)
        zbar = np.maximum(zbar, 1.0)
        z = np.minimum(z, np.minimum(zbar, beta1))
        s = SpaState.initial(cfg, h1, history=True)
        ok = True
        for t in range(T):
            ok &= check_s1(s, z[t], zbar[t], beta1, cfg)
            spa_update(s, z[t], zbar[t], h[t], None, cfg)
        if not ok:
            continue
        accepted += 1
        assert reghat_sp(s, cfg) <= bound_certificate_I(s, beta1, cfg) * (1 + 1e-12)
    assert accepted >= 900


def test_certificate_II_on_random_sequences():
    rng = np.random.default_rng(43)
    accepted = 0
    for _ in range(1000):
        T = int(rng.integers(1, 101))
        h1 = float(rng.uniform(0.5, 3.0))
        c1 = float(rng.uniform(0.5, 2.0))
        a = float(rng.uniform(0.25, 2.0))
        lam = float(rng.choice([1.0, 2.0]))
        z = rng.exponential(1.0, T) * (rng.random(T) < 0.8)
        zbar = np.maximum.accumulate(np.maximum(z, rng.uniform(0, 1, T)))
        beta1 = a * c1 / math.sqrt(h1) * math.sqrt(z.sum()) + float(rng.uniform(0, 1)) + 1e-3
        cfg = SpaConfig(c1=c1, c2=0.0, beta1=beta1, lam=lam)
        s = SpaState.initial(cfg, h1, history=True)
        ok = True
        for t in range(T):
            ok &= check_s2(s, a, cfg, z=z[t])
            spa_update(s, z[t], zbar[t], h1, None, cfg)
        if not ok:
            continue
        accepted += 1
        assert reghat_sp(s, cfg) <= bound_certificate_II(s, a, cfg) * (1 + 1e-12)
    assert accepted >= 900


def test_constant_penalty_reduces_to_sqrt_rate():
    """With h = h1 and a fixed zbar, beta_T is a constant multiple of sqrt(zbar + sum z)."""
    rng = np.random.default_rng(8)
    h1, c1, zbar = 1.7, 0.9, 1.0
    cfg = SpaConfig(c1=c1, c2=0.0, beta1=1e-3)
    s = SpaState.initial(cfg, h1)
    z = rng.uniform(0, 1, 10_000)
    for t in range(z.size - 1):
        spa_update(s, z[t], zbar, h1, None, cfg)
    ratio = s.beta / (c1 / math.sqrt(h1) * math.sqrt(zbar + z[:-1].sum()))
    assert 1.0 <= ratio <= 3.0


# ---------------------------------------------------------------- implicit root


def test_bisection_zero_nu():
    cfg = SpaConfig(c1=1.0, c2=81.0, beta1=5.0)
    s = SpaState.initial(cfg, 1.0)
    root = implicit_update_bisection(s, 0.0, lambda a: 1.0, 100, cfg)
    assert root.beta_next == s.beta and root.iterations == 0


def test_bisection_no_sign_change():
    cfg = SpaConfig(c1=1.0, c2=81.0, beta1=5.0)
    s = SpaState.initial(cfg, 1.0)
    with pytest.raises(BisectionError) as exc:
        implicit_update_bisection(s, 3.0, lambda a: 1.0, 1e-12, cfg)
    assert exc.value.f_lo < 0 and exc.value.f_hi < 0
    with pytest.raises(ValueError):
        implicit_update_bisection(s, 3.0, lambda a: 1.0, 10.0, cfg, method="newton")


@pytest.mark.parametrize("method", ["illinois", "bisection"])
def test_bisection_root_contract(method):
    k, T = 5, 2000
    cfg = SpaConfig(c1=1.3, c2=81 * 1.3 ** 2, beta1=75.0)
    rng = np.random.default_rng(3)
    for _ in range(30):
        L = rng.normal(0, 20, k)
        s = SpaState.initial(cfg, math.log(k))
        s.beta = float(rng.uniform(75, 500))
        s.sum_zh = float(rng.uniform(0, 100))
        nu = float(rng.uniform(0.01, s.beta / 2))
        r = {"L_next": L, "k": k, "T": T, "beta_t": s.beta, "sum_zh": s.sum_zh, "c1": cfg.c1,
             "c2": cfg.c2, "nu": nu}
        root = implicit_update_bisection(s, nu, lambda a: bobw_h(L, a, k, T), T, cfg, method=method)
        assert s.beta <= root.beta_next <= s.beta + T
        assert root.beta_next - s.beta <= nu / 9 * (1 + 1e-12)
        assert abs(bobw_F(root.beta_next, r)) <= 1e-9 * max(1.0, s.beta)


def test_bisection_matches_grid_scan():
    rounds = bobw_rounds(k=5, T=1000, n_rounds=300, seed=17, record_every=5)
    assert len(rounds) >= 20
    for r in rounds:
        cells, step = grid_root_cells(r)
        assert cells.size >= 1
        assert np.min(np.abs(r["beta_next"] - (cells + step / 2))) <= step
