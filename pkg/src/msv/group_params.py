"""Group parameters V1..V4 from an explicit fast volatility function.

The Poisson equations L0 phi = (f^2 - <f^2>)/2 and L0 xi = f - <f> for the OU
generator L0 = nu^2 d_yy + (m - y) d_y only enter through the derivatives
phi', xi', which have the closed integral form

    u'(y) = 1/(nu^2 p(y)) int_{-inf}^y g(w) p(w) dw,      p = N(m, nu^2) density.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline

from .errors import SourceNotCentered
from .params import DEFAULT_GH_NODES, FastFactorSpec, GroupParams, HestonParams, gauss_hermite_average

GRID_HALF_WIDTH = 8.0
DEFAULT_GRID_SIZE = 2048
CENTERING_TOL = 1e-10


@dataclass(frozen=True)
class PoissonSolution:
    grid: np.ndarray
    deriv: np.ndarray
    m: float
    nu: float

    def __post_init__(self):
        self.grid.setflags(write=False)
        self.deriv.setflags(write=False)

    @cached_property
    def spline(self) -> CubicSpline:
        return CubicSpline(self.grid, self.deriv)

    def __call__(self, y):
        """u'(y); zero outside the grid, where the Gaussian weight is below 1e-14."""
        y = np.asarray(y, dtype=float)
        inside = (y >= self.grid[0]) & (y <= self.grid[-1])
        return np.where(inside, self.spline(np.clip(y, self.grid[0], self.grid[-1])), 0.0)


def _cumulative(vals, y):
    return cumulative_simpson(vals, x=y, initial=0.0)


def solve_poisson_derivative(source, m: float, nu: float, grid_size: int = DEFAULT_GRID_SIZE) -> PoissonSolution:
    """Derivative u' of the solution of L0 u = source on [m - 8 nu, m + 8 nu].

    The source must be centered under N(m, nu^2). The integral is accumulated from
    the left below the mean and from the right above it (using the centering), so
    neither tail divides a rounding residue by a vanishing density.
    """
    mean = float(gauss_hermite_average(source, m, nu, DEFAULT_GH_NODES))
    scale = float(np.sqrt(gauss_hermite_average(lambda y: np.asarray(source(y)) ** 2, m, nu, DEFAULT_GH_NODES)))
    if abs(mean) > CENTERING_TOL * max(1.0, scale):
        raise SourceNotCentered(f"<source> = {mean:.3e} under N({m}, {nu}^2)")
    y = np.linspace(m - GRID_HALF_WIDTH * nu, m + GRID_HALF_WIDTH * nu, grid_size)
    u = (y - m) / nu
    dens = np.exp(-0.5 * u * u) / (nu * math.sqrt(2.0 * math.pi))
    gp = np.asarray(source(y), dtype=float) * dens
    left = _cumulative(gp, y)
    right = -_cumulative(gp[::-1], -y[::-1])[::-1]  # -int_y^{ymax} = int_{-inf}^y by centering
    integral = np.where(y <= m, left, right)
    deriv = integral / (nu * nu * dens)
    return PoissonSolution(y, deriv, m, nu)


def poisson_residual(sol: PoissonSolution, source, half_width: float = 4.0) -> float:
    """max |L0 u - source| on interior points |y - m| <= half_width * nu.

    u'' comes from a fourth-order central difference of the stored u'.
    """
    y, du = sol.grid, sol.deriv
    h = y[1] - y[0]
    d2u = np.full_like(du, np.nan)
    d2u[2:-2] = (-du[4:] + 8.0 * du[3:-1] - 8.0 * du[1:-3] + du[:-4]) / (12.0 * h)
    mask = np.abs(y - sol.m) <= half_width * sol.nu
    mask[:2] = mask[-2:] = False
    lhs = sol.nu**2 * d2u + (sol.m - y) * du
    return float(np.max(np.abs(lhs[mask] - np.asarray(source(y))[mask])))


def poisson_sources(spec: FastFactorSpec):
    """The two centered sources (f^2 - <f^2>)/2 and f - <f>."""
    f2_bar = float(spec.average(lambda y: spec.f(y) ** 2))
    f_bar = spec.f_bar
    return (lambda y: 0.5 * (spec.f(y) ** 2 - f2_bar)), (lambda y: spec.f(y) - f_bar)


def stationary_averages(spec: FastFactorSpec, grid_size: int = DEFAULT_GRID_SIZE, n_nodes: int = DEFAULT_GH_NODES) -> dict:
    """<phi'>, <xi'>, <f phi'>, <f xi'> and <f> under N(m, nu^2)."""
    src_phi, src_xi = poisson_sources(spec)
    dphi = solve_poisson_derivative(src_phi, spec.m, spec.nu, grid_size)
    dxi = solve_poisson_derivative(src_xi, spec.m, spec.nu, grid_size)

    def avg(func):
        return float(gauss_hermite_average(func, spec.m, spec.nu, n_nodes))

    return {
        "dphi": avg(dphi),
        "dxi": avg(dxi),
        "f_dphi": avg(lambda y: spec.f(y) * dphi(y)),
        "f_dxi": avg(lambda y: spec.f(y) * dxi(y)),
        "f_bar": avg(spec.f),
        "solutions": (dphi, dxi),
    }


def compute_group_params(
    spec: FastFactorSpec,
    p: HestonParams,
    grid_size: int = DEFAULT_GRID_SIZE,
    n_nodes: int = DEFAULT_GH_NODES,
) -> GroupParams:
    avgs = stationary_averages(spec, grid_size, n_nodes)
    k = spec.nu * math.sqrt(2.0)
    return GroupParams(
        v1=spec.rho_yz * p.sigma * k * avgs["dphi"],
        v2=p.rho_xz * spec.rho_yz * p.sigma**2 * k * avgs["dxi"],
        v3=spec.rho_xy * k * avgs["f_dphi"],
        v4=spec.rho_xy * p.rho_xz * p.sigma * k * avgs["f_dxi"],
        rho_eff=p.rho_xz * avgs["f_bar"],
        f_bar=avgs["f_bar"],
    )
