import math

import numpy as np
import pytest

from msv.errors import InvalidParameter, InvalidState
from msv.heston_cf import psi0_at
from msv.mc import SimConfig, estimate_cf, estimate_price, estimate_put, simulate
from msv.params import FastFactorSpec, HestonParams, normalize_f, validate_correlations
from msv.pricer import bs_price

SMALL = SimConfig(n_paths=20000, n_steps=128, t_horizon=1.0, seed=11, block_size=4096)


@pytest.fixture(scope="module")
def flat_model(heston):
    spec = normalize_f("constant", 0.0, 0.3, epsilon=0.01)
    corr = validate_correlations(0.0, heston.rho_xz, 0.0)
    return heston, spec, corr


@pytest.fixture(scope="module")
def flat_batch(flat_model):
    p, spec, corr = flat_model
    return simulate(p, spec, corr, 0.0, 0.0, 0.04, SMALL)


def test_same_seed_any_thread_count(flat_model):
    p, spec, corr = flat_model
    cfg = SimConfig(n_paths=5000, n_steps=32, seed=5, block_size=1000)
    a = simulate(p, spec, corr, 0.0, 0.0, 0.04, cfg, threads=1)
    b = simulate(p, spec, corr, 0.0, 0.0, 0.04, cfg, threads=3)
    assert np.array_equal(a.x_terminal, b.x_terminal)
    assert a.model_hash == b.model_hash
    c = simulate(p, spec, corr, 0.0, 0.0, 0.04, SimConfig(n_paths=5000, n_steps=32, seed=6, block_size=1000))
    assert not np.array_equal(a.x_terminal, c.x_terminal)


def test_cf_estimator_identities(flat_batch):
    est, err = estimate_cf(flat_batch, [0.0, 1.5, -1.5])
    assert est[0] == 1.0 and err[0] == 0.0
    assert est[2] == np.conj(est[1])


def test_reduction_to_heston(flat_model, flat_batch):
    p = flat_model[0]
    s = np.array([0.5, 1.0, 2.0, 5.0])
    est, err = estimate_cf(flat_batch, s)
    ref = psi0_at(1.0, 0.0, 0.04, s, p, p.rho_xz)
    assert np.all(np.abs(est - ref) <= 3 * err)


def test_martingale(flat_model, flat_batch):
    p = flat_model[0]
    price, err = estimate_price(flat_batch, [0.0], p.r, 1.0)
    assert abs(price[0] - 1.0) <= 3 * err[0]
    far, _ = estimate_price(flat_batch, [1e6], p.r, 1.0)
    assert far[0] == 0.0


def test_parity_on_same_paths(flat_model, flat_batch):
    r = flat_model[0].r
    strikes = np.array([0.8, 1.0, 1.2])
    calls, _ = estimate_price(flat_batch, strikes, r, 1.0)
    puts, _ = estimate_put(flat_batch, strikes, r, 1.0)
    forward = math.exp(-r) * np.exp(flat_batch.x_terminal).mean()
    np.testing.assert_allclose(calls - puts, forward - strikes * math.exp(-r), atol=1e-12)


def test_deterministic_variance_limit():
    kappa, theta, z0, r, t = 2.0, 0.04, 0.09, 0.01, 1.0
    p = HestonParams(kappa, theta, 1e-8, 0.0, r)
    spec = normalize_f("constant", 0.0, 0.3)
    corr = validate_correlations(0.0, 0.0, 0.0)
    batch = simulate(p, spec, corr, 0.0, 0.0, z0, SimConfig(n_paths=20000, n_steps=256, seed=3))
    integrated = theta * t + (z0 - theta) * (1 - math.exp(-kappa * t)) / kappa
    strikes = np.array([0.9, 1.0, 1.1])
    price, err = estimate_price(batch, strikes, r, t)
    ref = bs_price(1.0, strikes, t, r, math.sqrt(integrated / t))
    assert np.all(np.abs(price - ref) <= 3 * err)


def test_fast_factor_runs_with_substeps(fast_heston, exp_spec):
    corr = validate_correlations(exp_spec.rho_xy, fast_heston.rho_xz, exp_spec.rho_yz)
    cfg = SimConfig(n_paths=4000, n_steps=32, t_horizon=1.0, seed=1)
    batch = simulate(fast_heston, exp_spec, corr, 0.0, 0.0, 0.5, cfg)
    price, err = estimate_price(batch, [0.0], fast_heston.r, 1.0)
    assert abs(price[0] - 1.0) <= 3 * err[0]


def test_input_validation(flat_model):
    p, spec, corr = flat_model
    with pytest.raises(InvalidParameter):
        simulate(p, spec, corr, 0.0, 0.0, 0.0, SMALL)
    with pytest.raises(InvalidParameter):
        simulate(p, spec, validate_correlations(0.1, p.rho_xz, 0.0), 0.0, 0.0, 0.04, SMALL)
    with pytest.raises(InvalidParameter):
        estimate_price(simulate(p, spec, corr, 0.0, 0.0, 0.04, SimConfig(n_paths=10, n_steps=4)), [-1.0], 0.0, 1.0)


@pytest.mark.parametrize("kwargs", [dict(n_paths=0), dict(n_steps=0), dict(t_horizon=0.0), dict(y_substep_target=2.0)])
def test_sim_config_validation(kwargs):
    with pytest.raises(InvalidParameter):
        SimConfig(**kwargs)


def test_sim_config_roundtrip():
    assert SimConfig.from_dict(SMALL.to_dict()) == SMALL


def test_non_finite_state_detected(heston):
    spec = FastFactorSpec(0.0, 0.3, 0.01, lambda y: np.full_like(np.asarray(y, float), np.inf))
    corr = validate_correlations(0.0, heston.rho_xz, 0.0)
    with pytest.raises(InvalidState):
        simulate(heston, spec, corr, 0.0, 0.0, 0.04, SimConfig(n_paths=10, n_steps=4))
