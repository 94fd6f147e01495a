import math

import numpy as np
import pytest

from msv.errors import SourceNotCentered
from msv.group_params import (
    compute_group_params,
    poisson_residual,
    poisson_sources,
    solve_poisson_derivative,
    stationary_averages,
)
from msv.params import normalize_f

M, NU = 0.2, 0.4


@pytest.mark.parametrize(
    "source, exact",
    [
        (lambda y: y - M, lambda y: -np.ones_like(y)),
        (lambda y: (y - M) ** 2 - NU**2, lambda y: -(y - M)),
    ],
    ids=["linear", "quadratic"],
)
def test_closed_form_solutions(source, exact):
    sol = solve_poisson_derivative(source, M, NU)
    y = np.linspace(M - 5 * NU, M + 5 * NU, 101)
    np.testing.assert_allclose(sol(y), exact(y), atol=1e-8)
    assert poisson_residual(sol, source) < 1e-6


def test_outside_grid_is_zero():
    sol = solve_poisson_derivative(lambda y: y - M, M, NU)
    assert sol(M + 9 * NU) == 0.0


def test_uncentered_source_rejected():
    with pytest.raises(SourceNotCentered):
        solve_poisson_derivative(lambda y: y, M, NU)


@pytest.mark.parametrize("nu", [0.2, 0.5, 1.0])
def test_exponential_averages(nu):
    spec = normalize_f("exponential", 0.0, nu, rho_xy=-0.5, rho_yz=0.3)
    avgs = stationary_averages(spec)
    assert abs(avgs["f_bar"] - math.exp(-nu * nu / 2)) < 1e-12
    assert abs(avgs["dphi"] + 1.0) < 1e-8
    assert abs(avgs["dxi"] + math.exp(-nu * nu / 2)) < 1e-8
    for sol, src in zip(avgs["solutions"], poisson_sources(spec)):
        assert poisson_residual(sol, src) < 1e-5


def test_frozen_group_params(exp_groups):
    assert exp_groups.v1 == pytest.approx(-0.05091168824719894, abs=1e-10)
    assert exp_groups.v2 == pytest.approx(0.011681146982552628, abs=1e-10)
    assert exp_groups.v3 == pytest.approx(0.3555131182267037, abs=1e-10)
    assert exp_groups.v4 == pytest.approx(-0.0779005984589798, abs=1e-10)
    assert exp_groups.rho_eff == pytest.approx(-0.6 * math.exp(-0.045), abs=1e-12)


def test_grid_refinement(exp_spec, fast_heston):
    a = compute_group_params(exp_spec, fast_heston, grid_size=2048)
    b = compute_group_params(exp_spec, fast_heston, grid_size=8192)
    assert max(abs(x - y) for x, y in zip(a.v, b.v)) < 1e-7


def test_constant_f_gives_zero(fast_heston):
    spec = normalize_f("constant", 0.0, 0.5, rho_xy=-0.5, rho_yz=0.4)
    g = compute_group_params(spec, fast_heston)
    assert g.v == (0.0, 0.0, 0.0, 0.0)
    assert g.rho_eff == pytest.approx(fast_heston.rho_xz, abs=1e-15)


def test_zero_fast_correlations_give_zero(fast_heston):
    spec = normalize_f("exponential", 0.0, 0.5)
    assert compute_group_params(spec, fast_heston).v == (0.0, 0.0, 0.0, 0.0)


def test_monte_carlo_stationary_averages(exp_spec):
    avgs = stationary_averages(exp_spec)
    dphi, dxi = avgs["solutions"]
    y = np.random.default_rng(3).normal(exp_spec.m, exp_spec.nu, 1_000_000)
    f = exp_spec.f(y)
    for key, samples in (("dphi", dphi(y)), ("dxi", dxi(y)), ("f_dphi", f * dphi(y)), ("f_dxi", f * dxi(y))):
        se = samples.std(ddof=1) / math.sqrt(samples.size)
        assert abs(samples.mean() - avgs[key]) <= 3 * se, key
