"""European option pricing from a characteristic function, and implied volatility.

A characteristic function handle is any callable ``cf(s)`` that accepts a complex
numpy array ``s`` and returns E[exp(i s X_T)] for the log price X_T elementwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtr

from .errors import NoConvergence, OutOfBounds, QuadratureNotConverged, TruncationTooNarrow

CF = Callable[[np.ndarray], np.ndarray]

TAIL_TOL = 1e-12
GP_TOL = 1e-12
GP_NODES = 32
GP_MAX_PANELS = 4096
PARITY_TOL = 1e-6
IV_TOL = 1e-10
IV_MAX_ITER = 200


@dataclass(frozen=True)
class QuoteRow:
    strike: float
    price: float
    implied_vol: Optional[float] = None
    stderr: Optional[float] = None
    model: str = "heston0"


def bs_price(spot, strike, tau, r, vol, kind="call"):
    """Black-Scholes price; ``vol`` may be 0 (discounted intrinsic value)."""
    spot, strike, vol = np.asarray(spot, float), np.asarray(strike, float), np.asarray(vol, float)
    disc = math.exp(-r * tau)
    sd = vol * math.sqrt(tau)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = (np.log(spot / strike) + r * tau) / sd + 0.5 * sd
    d2 = d1 - sd
    call = np.where(sd > 0, spot * ndtr(d1) - strike * disc * ndtr(d2), np.maximum(spot - strike * disc, 0.0))
    if kind == "call":
        out = call
    elif kind == "put":
        out = call - spot + strike * disc
    else:
        raise ValueError(f"unknown option kind {kind!r}")
    return out[()] if np.ndim(out) == 0 else out


def bs_vega(spot, strike, tau, r, vol):
    sd = vol * math.sqrt(tau)
    d1 = (math.log(spot / strike) + r * tau) / sd + 0.5 * sd
    return spot * math.sqrt(tau) * math.exp(-0.5 * d1 * d1) / math.sqrt(2.0 * math.pi)


def bs_cf(vol, tau, r, x0) -> CF:
    """Characteristic function of log S_T under Black-Scholes."""

    def cf(s):
        s = np.asarray(s, dtype=complex)
        return np.exp(1j * s * (x0 + (r - 0.5 * vol * vol) * tau) - 0.5 * vol * vol * tau * s * s)

    return cf


def _tail_cutoff(cf: CF, norm1: complex, tol=TAIL_TOL):
    """Smallest s_max = 2^k with |cf(s)|/s and |cf(s - i)/cf(-i)|/s below ``tol`` on [s_max, 2 s_max]."""
    s_max = 4.0
    while s_max < 1e5:
        probe = np.linspace(s_max, 2.0 * s_max, 17)
        env = np.maximum(np.abs(cf(probe + 0j)), np.abs(cf(probe - 1j) / norm1)) / probe
        if np.all(env < tol):
            return s_max
        s_max *= 2.0
    raise QuadratureNotConverged("characteristic function does not decay fast enough")


def _gl(lo, hi, panels, nodes=GP_NODES):
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)[:, None]
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    return (mid + half * x).ravel(), (half * w).ravel()


def _gp_integrals(cf: CF, log_k: np.ndarray, norm1: complex, s_max: float, panels: int):
    u, w = _gl(0.0, s_max, panels)
    c2 = cf(u + 0j)
    c1 = cf(u - 1j) / norm1
    phase = np.exp(-1j * np.outer(log_k, u)) / (1j * u)
    i1 = (phase * c1).real @ w
    i2 = (phase * c2).real @ w
    return i1, i2


def price_gil_pelaez(cf: CF, strike, tau: float, r: float, x0: float, kind: str = "call"):
    """European option price(s) from the two Gil-Pelaez probability integrals.

    call = S0 P1 - K e^{-r tau} P2, with
    P2 = 1/2 + 1/pi int_0^inf Re(e^{-iuk} cf(u)/(iu)) du and P1 the same under the
    share measure, cf(u - i)/cf(-i). The integrals are taken on [0, s_max] by composite
    Gauss-Legendre with the panel count doubled until the change is below 1e-12.
    """
    strikes = np.atleast_1d(np.asarray(strike, dtype=float))
    log_k = np.log(strikes)
    norm1 = complex(np.asarray(cf(np.array([-1j])))[0])
    s_max = _tail_cutoff(cf, norm1)
    panels = max(4, int(s_max) // 8)
    prev = _gp_integrals(cf, log_k, norm1, s_max, panels)
    while True:
        panels *= 2
        if panels > GP_MAX_PANELS:
            raise QuadratureNotConverged(f"Gil-Pelaez integrals not converged with {panels // 2} panels")
        cur = _gp_integrals(cf, log_k, norm1, s_max, panels)
        if max(np.max(np.abs(cur[0] - prev[0])), np.max(np.abs(cur[1] - prev[1]))) < GP_TOL:
            break
        prev = cur
    p1 = 0.5 + cur[0] / math.pi
    p2 = 0.5 + cur[1] / math.pi
    spot = math.exp(x0)
    disc = math.exp(-r * tau)
    call = spot * p1 - strikes * disc * p2
    out = call if kind == "call" else call - spot + strikes * disc
    return out[0] if np.ndim(strike) == 0 else out


def cumulants(cf: CF, h: float = 1e-3):
    """First two cumulants of X_T from central differences of log cf at 0."""
    lp, l0, lm = np.log(cf(np.array([h, 0.0, -h], dtype=complex)))
    c1 = ((lp - lm) / (2j * h)).real
    c2 = (-(lp - 2.0 * l0 + lm) / h**2).real
    return float(c1), float(c2)


def _chi_psi(w, a, c, d):
    """Cosine-weighted integrals of e^x and 1 over [c, d] (broadcast over k and strikes)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        chi = (
            np.cos(w * (d - a)) * np.exp(d)
            - np.cos(w * (c - a)) * np.exp(c)
            + w * np.sin(w * (d - a)) * np.exp(d)
            - w * np.sin(w * (c - a)) * np.exp(c)
        ) / (1.0 + w * w)
        psi = np.where(w == 0, d - c, (np.sin(w * (d - a)) - np.sin(w * (c - a))) / np.where(w == 0, 1.0, w))
    return chi, psi


def price_cos(
    cf: CF,
    strikes,
    tau: float,
    r: float,
    x0: float,
    n_terms: int = 512,
    cumulant_width: float = 10.0,
    kind: str = "call",
    return_both: bool = False,
):
    """Fourier-cosine expansion prices on [c1 - L sqrt(c2), c1 + L sqrt(c2)].

    Puts are computed from the series and calls by parity. The series call/put pair
    is used as a self-check: if it violates parity by more than 1e-6 the truncation
    interval is too narrow.
    """
    if n_terms < 64:
        raise ValueError("n_terms must be >= 64")
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    c1, c2 = cumulants(cf)
    half = cumulant_width * math.sqrt(max(c2, 0.0))
    a, b = c1 - half, c1 + half
    k = np.arange(n_terms)
    w = k * math.pi / (b - a)
    coef = (cf(w + 0j) * np.exp(-1j * w * a)).real
    coef[0] *= 0.5
    log_k = np.clip(np.log(strikes), a, b)[:, None]
    chi_p, psi_p = _chi_psi(w[None, :], a, a, log_k)
    chi_c, psi_c = _chi_psi(w[None, :], a, log_k, b)
    scale = 2.0 / (b - a)
    vk_put = scale * (strikes[:, None] * psi_p - chi_p)
    vk_call = scale * (chi_c - strikes[:, None] * psi_c)
    disc = math.exp(-r * tau)
    put = disc * (vk_put @ coef)
    call_series = disc * (vk_call @ coef)
    spot = math.exp(x0)
    parity = spot - strikes * disc
    dev = np.max(np.abs(call_series - put - parity))
    if dev > PARITY_TOL:
        raise TruncationTooNarrow(f"put-call parity violated by {dev:.3g} on [{a:.4g}, {b:.4g}]")
    call = put + parity
    if return_both:
        return call, put
    out = call if kind == "call" else put
    return out[0] if np.ndim(strikes) == 0 else out


def implied_vol(price: float, strike: float, tau: float, r: float, spot: float, kind: str = "call") -> float:
    """Black-Scholes implied volatility by Newton iteration safeguarded with bisection.

    Prices within 1e-12 * spot of a no-arbitrage bound raise OutOfBounds.
    """
    disc = math.exp(-r * tau)
    if kind == "put":
        price = price + spot - strike * disc
    elif kind != "call":
        raise ValueError(f"unknown option kind {kind!r}")
    lower = max(spot - strike * disc, 0.0)
    margin = 1e-12 * spot
    if not (lower + margin < price < spot - margin):
        raise OutOfBounds(f"price {price!r} outside ({lower!r}, {spot!r})")

    def f(v):
        return float(bs_price(spot, strike, tau, r, v)) - price

    lo, hi = 0.0, 1.0
    while f(hi) < 0.0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e3:
            raise NoConvergence("could not bracket the implied volatility")
    vol = 0.5 * (lo + hi)
    for _ in range(IV_MAX_ITER):
        fv = f(vol)
        if fv > 0.0:
            hi = vol
        else:
            lo = vol
        vega = bs_vega(spot, strike, tau, r, vol)
        step = fv / vega if vega > 0.0 else math.inf
        new = vol - step
        if not (lo < new < hi):
            new = 0.5 * (lo + hi)
        if abs(new - vol) < 1e-13 or hi - lo < 1e-13:
            return new
        vol = new
    raise NoConvergence(f"implied volatility not converged after {IV_MAX_ITER} iterations")
