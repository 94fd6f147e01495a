"""Heston characteristic function with a fast mean-reverting volatility correction."""

__version__ = "0.1.0"

from .correction import (
    CorrectionCoeffs,
    corrected_cf,
    corrected_cf_at,
    f01_by_ode,
    f01_by_quadrature,
    pde_residual_psi0,
    pde_residual_psi1,
)
from .errors import MSVError
from .group_params import compute_group_params, solve_poisson_derivative
from .heston_cf import CfCoeffs, cd_coeffs, psi0, psi0_at
from .mc import PathBatch, SimConfig, estimate_cf, estimate_price, simulate
from .params import (
    CorrelationMatrix,
    EvalPoint,
    FastFactorSpec,
    GroupParams,
    HestonParams,
    normalize_f,
    validate_correlations,
    validate_heston,
)
from .pricer import QuoteRow, implied_vol, price_cos, price_gil_pelaez

__all__ = [
    "CfCoeffs",
    "CorrectionCoeffs",
    "CorrelationMatrix",
    "EvalPoint",
    "FastFactorSpec",
    "GroupParams",
    "HestonParams",
    "MSVError",
    "PathBatch",
    "QuoteRow",
    "SimConfig",
    "cd_coeffs",
    "compute_group_params",
    "corrected_cf",
    "corrected_cf_at",
    "estimate_cf",
    "estimate_price",
    "f01_by_ode",
    "f01_by_quadrature",
    "implied_vol",
    "normalize_f",
    "pde_residual_psi0",
    "pde_residual_psi1",
    "price_cos",
    "price_gil_pelaez",
    "psi0",
    "psi0_at",
    "simulate",
    "solve_poisson_derivative",
    "validate_correlations",
    "validate_heston",
]
