import numpy as np
import pytest

from msv.group_params import compute_group_params
from msv.params import GroupParams, HestonParams, normalize_f


@pytest.fixture(scope="session")
def heston():
    return HestonParams(kappa=1.15, theta=0.04, sigma=0.2, rho_xz=-0.6, r=0.02)


@pytest.fixture(scope="session")
def fast_heston():
    """Slow factor of the exponential-f test model (large variance, so the expansion is accurate)."""
    return HestonParams(kappa=2.0, theta=0.5, sigma=0.4, rho_xz=-0.6, r=0.02)


@pytest.fixture(scope="session")
def exp_spec():
    return normalize_f("exponential", 0.0, 0.3, epsilon=0.01, rho_xy=-0.8, rho_yz=0.3)


@pytest.fixture(scope="session")
def exp_groups(exp_spec, fast_heston):
    return compute_group_params(exp_spec, fast_heston)


@pytest.fixture
def generic_groups():
    return GroupParams(v1=0.013, v2=-0.021, v3=0.3, v4=0.017, rho_eff=-0.5, f_bar=0.9)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
