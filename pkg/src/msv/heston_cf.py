"""Leading-order characteristic function of the averaged Heston operator.

psi0(tau, x, z; s) = exp(C(tau, s) + z D(tau, s) + i s x), where (C, D) solve

    dD/dtau = -(s^2 + i s)/2 - (kappa - i rho sigma s) D + sigma^2 D^2 / 2,
    dC/dtau = i r s + kappa theta D,          C(0) = D(0) = 0,

and rho is the effective correlation rho_xz * <f>.

The closed forms are evaluated with the decaying exponential exp(-d tau) and the
ratio g~ = (beta - d)/(beta + d), beta = kappa - i rho sigma s, so that the complex
logarithm in C does not cross its branch cut at long maturities.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalOverflow
from .params import EvalPoint, HestonParams


@dataclass(frozen=True)
class CfCoeffs:
    c: complex
    d_cap: complex
    d_disc: complex
    g_tilde: complex


def _beta(s, p: HestonParams, rho_eff: float):
    return p.kappa - 1j * rho_eff * p.sigma * s


def discriminant(s, p: HestonParams, rho_eff: float):
    """d(s) = sqrt((rho sigma i s - kappa)^2 + sigma^2 (i s + s^2)), branch with Re(d) >= 0."""
    s = np.asarray(s, dtype=complex)
    d = np.sqrt((rho_eff * p.sigma * 1j * s - p.kappa) ** 2 + p.sigma**2 * (1j * s + s * s))
    flip = (d.real < 0.0) | ((d.real == 0.0) & (d.imag < 0.0))
    d = np.where(flip, -d, d)
    return d[()] if d.ndim == 0 else d


def _parts(tau, s, p: HestonParams, rho_eff: float):
    """Return (C, D, d, g~) as arrays broadcast over tau and s."""
    s = np.asarray(s, dtype=complex)
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0.0):
        raise ValueError("tau must be >= 0")
    beta = _beta(s, p, rho_eff)
    d = discriminant(s, p, rho_eff)
    e = np.exp(-d * tau)
    bp = beta + d
    bm = beta - d
    with np.errstate(divide="ignore", invalid="ignore"):
        g_tilde = bm / bp
        # D = (beta - d)/sigma^2 * (1 - e)/(1 - g~ e), rewritten without the ratio so it
        # stays finite where beta + d = 0 (complex s only, e.g. s = -i with kappa < rho sigma)
        denom = bp - bm * e
        dcap = -(s * s + 1j * s) * (1.0 - e) / denom
        # log((1 - g~ e)/(1 - g~)) evaluated as a difference of principal logs when
        # |g~| <= 1, otherwise directly from log(denom / (2 d))
        small_g = np.abs(bm) <= np.abs(bp)
        log_trap = np.log(1.0 - g_tilde * e) - np.log(1.0 - g_tilde)
        log_alt = np.log(denom / (2.0 * d))
        log_term = np.where(small_g, log_trap, log_alt)
        c = 1j * p.r * s * tau + p.kappa * p.theta / p.sigma**2 * (bm * tau - 2.0 * log_term)
    # s = 0: exact zero (the ratio above is 0/0 there)
    zero_s = s == 0
    c = np.where(zero_s, 0.0 + 0.0j, c)
    dcap = np.where(zero_s, 0.0 + 0.0j, dcap)
    # tau = 0: terminal condition
    zero_t = tau == 0
    c = np.where(zero_t, 0.0 + 0.0j, c)
    dcap = np.where(zero_t, 0.0 + 0.0j, dcap)
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(dcap))):
        raise NumericalOverflow("non-finite Riccati coefficients")
    return c, dcap, d, g_tilde


def _d_only(tau, s, p: HestonParams, rho_eff: float):
    """D(tau, s) alone (no logarithms); same stable form as in _parts."""
    s = np.asarray(s, dtype=complex)
    beta = _beta(s, p, rho_eff)
    d = discriminant(s, p, rho_eff)
    e = np.exp(-d * np.asarray(tau, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        dcap = -(s * s + 1j * s) * (1.0 - e) / ((beta + d) - (beta - d) * e)
    return np.where((s == 0) | (np.asarray(tau) == 0), 0.0 + 0.0j, dcap)


def _unwrap(a):
    return a[()] if np.ndim(a) == 0 else a


def cd_coeffs(tau, s, p: HestonParams, rho_eff: float) -> CfCoeffs:
    """Riccati coefficients C(tau, s), D(tau, s) with the discriminant and stable ratio."""
    c, dcap, d, g = _parts(tau, s, p, rho_eff)
    return CfCoeffs(_unwrap(c), _unwrap(dcap), _unwrap(d), _unwrap(g))


def d_coeff(tau, s, p: HestonParams, rho_eff: float):
    return _unwrap(_parts(tau, s, p, rho_eff)[1])


def log_psi0(tau, x, z, s, p: HestonParams, rho_eff: float):
    c, dcap, _, _ = _parts(tau, s, p, rho_eff)
    return _unwrap(c + z * dcap + 1j * np.asarray(s, dtype=complex) * x)


def psi0(pt: EvalPoint, p: HestonParams, rho_eff: float):
    """Leading-order characteristic function at ``pt`` (``pt.s`` may be an array)."""
    return psi0_at(pt.tau, pt.x, pt.z, pt.s, p, rho_eff)


def psi0_at(tau, x, z, s, p: HestonParams, rho_eff: float):
    val = np.exp(log_psi0(tau, x, z, s, p, rho_eff))
    s_arr = np.asarray(s, dtype=complex)
    # exact boundary values
    val = np.where(s_arr == 0, 1.0 + 0.0j, val)
    if np.all(np.asarray(tau) == 0):
        val = np.exp(1j * s_arr * x)
    return _unwrap(val)


def riccati_rhs(s, dcap, p: HestonParams, rho_eff: float):
    """dD/dtau and dC/dtau - i r s for given D (used by the ODE cross-checks)."""
    s = np.asarray(s, dtype=complex)
    dd = -0.5 * (s * s + 1j * s) - _beta(s, p, rho_eff) * dcap + 0.5 * p.sigma**2 * dcap * dcap
    dc = p.kappa * p.theta * dcap
    return dd, dc


def cd_coeffs_as_printed(tau, s, p: HestonParams, rho_eff: float):
    """Direct transcription with g = (beta + d)/(beta - d) and exp(+d tau).

    Suffers from the branch cut of the logarithm at long maturities; kept as a
    reference for short maturities only.
    """
    s = np.asarray(s, dtype=complex)
    beta = _beta(s, p, rho_eff)
    d = np.sqrt((rho_eff * p.sigma * 1j * s - p.kappa) ** 2 + p.sigma**2 * (1j * s + s * s))
    g = (beta + d) / (beta - d)
    e = np.exp(tau * d)
    c = 1j * p.r * s * tau + p.kappa * p.theta / p.sigma**2 * (
        (beta + d) * tau - 2.0 * np.log((1.0 - g * e) / (1.0 - g))
    )
    dcap = (beta + d) / p.sigma**2 * (1.0 - e) / (1.0 - g * e)
    return _unwrap(c), _unwrap(dcap)
