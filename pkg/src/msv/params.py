"""Model parameter types, validation and (de)serialization.

Every symbol of the three-factor model lives here:

    dX = (r - f(Y)^2 Z / 2) dt + f(Y) sqrt(Z) dW^x
    dY = (Z / eps) (m - Y) dt + nu sqrt(2) sqrt(Z / eps) dW^y
    dZ = kappa (theta - Z) dt + sigma sqrt(Z) dW^z

with pairwise correlations rho_xy, rho_xz, rho_yz between the Brownian drivers.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Union

import numpy as np

from .errors import CorrelationNotPD, InvalidParameter, NormalizationFailed

DEFAULT_GH_NODES = 128
NORMALIZATION_TOL = 1e-10

FSpec = Union[str, Callable[[np.ndarray], np.ndarray]]


def _check_finite(name, value):
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise InvalidParameter(name, f"expected a finite real number, got {value!r}")


def _check_corr(name, value):
    _check_finite(name, value)
    if not -1.0 < value < 1.0:
        raise InvalidParameter(name, "correlation must lie strictly inside (-1, 1)")


@dataclass(frozen=True)
class HestonParams:
    """Slow variance factor and rate. ``rho_xz`` is the raw spot/variance correlation."""

    kappa: float
    theta: float
    sigma: float
    rho_xz: float
    r: float = 0.0

    def __post_init__(self):
        for name in ("kappa", "theta", "sigma"):
            value = getattr(self, name)
            _check_finite(name, value)
            if value <= 0.0:
                raise InvalidParameter(name, "must be > 0")
        _check_corr("rho_xz", self.rho_xz)
        _check_finite("r", self.r)

    @property
    def feller(self) -> bool:
        """2*kappa*theta >= sigma^2. Informational only."""
        return 2.0 * self.kappa * self.theta >= self.sigma**2

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "HestonParams":
        return cls(**{k: d[k] for k in ("kappa", "theta", "sigma", "rho_xz")}, r=d.get("r", 0.0))


def validate_heston(p: HestonParams) -> HestonParams:
    """Re-run the parameter checks and return ``p``; ``p.feller`` carries the Feller flag."""
    if not isinstance(p, HestonParams):
        raise InvalidParameter("heston", f"expected HestonParams, got {type(p).__name__}")
    return HestonParams(p.kappa, p.theta, p.sigma, p.rho_xz, p.r)


@dataclass(frozen=True)
class CorrelationMatrix:
    rho_xy: float
    rho_xz: float
    rho_yz: float
    chol: np.ndarray = field(repr=False, compare=False)

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [1.0, self.rho_xy, self.rho_xz],
                [self.rho_xy, 1.0, self.rho_yz],
                [self.rho_xz, self.rho_yz, 1.0],
            ]
        )

    def to_dict(self) -> dict:
        return {"rho_xy": self.rho_xy, "rho_xz": self.rho_xz, "rho_yz": self.rho_yz}

    @classmethod
    def from_dict(cls, d: dict) -> "CorrelationMatrix":
        return validate_correlations(d["rho_xy"], d["rho_xz"], d["rho_yz"])


def validate_correlations(rho_xy: float, rho_xz: float, rho_yz: float) -> CorrelationMatrix:
    """Check positive definiteness of the (x, y, z) correlation matrix and factor it.

    Ordering of the factor is (x, y, z).
    """
    for name, value in (("rho_xy", rho_xy), ("rho_xz", rho_xz), ("rho_yz", rho_yz)):
        _check_finite(name, value)
        if abs(value) >= 1.0:
            raise CorrelationNotPD(f"|{name}| = {abs(value)} must be < 1")
    lhs = rho_xy**2 + rho_xz**2 + rho_yz**2 - 2.0 * rho_xy * rho_xz * rho_yz
    if not lhs < 1.0:
        raise CorrelationNotPD(
            f"rho_xy^2 + rho_xz^2 + rho_yz^2 - 2 rho_xy rho_xz rho_yz = {lhs:.6g} >= 1"
        )
    mat = np.array([[1.0, rho_xy, rho_xz], [rho_xy, 1.0, rho_yz], [rho_xz, rho_yz, 1.0]])
    chol = np.linalg.cholesky(mat)
    chol.setflags(write=False)
    return CorrelationMatrix(float(rho_xy), float(rho_xz), float(rho_yz), chol)


def gauss_hermite_average(func, m: float, nu: float, n: int = DEFAULT_GH_NODES):
    """Average of ``func(Y)`` for Y ~ N(m, nu^2) by n-point Gauss-Hermite quadrature."""
    x, w = np.polynomial.hermite.hermgauss(n)
    y = m + math.sqrt(2.0) * nu * x
    vals = np.asarray(func(y))
    return np.tensordot(w, vals, axes=(0, 0)) / math.sqrt(math.pi)


_F_KINDS = ("constant", "exponential")


def _raw_f(f_spec: FSpec):
    if callable(f_spec):
        return f_spec
    if f_spec == "constant":
        return lambda y: np.ones_like(np.asarray(y, dtype=float))
    if f_spec == "exponential":
        return lambda y: np.exp(np.asarray(y, dtype=float))
    raise InvalidParameter("f_spec", f"unknown volatility function {f_spec!r}; expected one of {_F_KINDS}")


@dataclass(frozen=True)
class FastFactorSpec:
    """Fast OU factor Y and the volatility function f applied to it.

    ``f_scale`` is the constant that normalizes the raw function so that
    <f^2> = 1 under N(m, nu^2); build instances with :func:`normalize_f`.
    """

    m: float
    nu: float
    epsilon: float
    f_spec: FSpec = "constant"
    rho_xy: float = 0.0
    rho_yz: float = 0.0
    f_scale: float = 1.0

    def __post_init__(self):
        _check_finite("m", self.m)
        for name in ("nu", "epsilon"):
            value = getattr(self, name)
            _check_finite(name, value)
            if value <= 0.0:
                raise InvalidParameter(name, "must be > 0")
        _check_corr("rho_xy", self.rho_xy)
        _check_corr("rho_yz", self.rho_yz)
        _raw_f(self.f_spec)

    def f(self, y):
        return _raw_f(self.f_spec)(y) / self.f_scale

    def average(self, func, n: int = DEFAULT_GH_NODES):
        """<func> under the invariant law N(m, nu^2)."""
        return gauss_hermite_average(func, self.m, self.nu, n)

    @property
    def f_bar(self) -> float:
        return float(self.average(self.f))

    @property
    def sqrt_eps(self) -> float:
        return math.sqrt(self.epsilon)

    def to_dict(self) -> dict:
        if callable(self.f_spec):
            raise InvalidParameter("f_spec", "custom volatility functions cannot be serialized")
        return {
            "m": self.m,
            "nu": self.nu,
            "epsilon": self.epsilon,
            "f_spec": self.f_spec,
            "rho_xy": self.rho_xy,
            "rho_yz": self.rho_yz,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FastFactorSpec":
        return normalize_f(
            d.get("f_spec", "constant"),
            d["m"],
            d["nu"],
            epsilon=d["epsilon"],
            rho_xy=d.get("rho_xy", 0.0),
            rho_yz=d.get("rho_yz", 0.0),
        )


def normalize_f(
    f_spec: FSpec,
    m: float,
    nu: float,
    *,
    epsilon: float = 0.01,
    rho_xy: float = 0.0,
    rho_yz: float = 0.0,
    n_nodes: int = DEFAULT_GH_NODES,
) -> FastFactorSpec:
    """Scale the raw volatility function so that <f^2> = 1 under N(m, nu^2).

    The second moment is computed with ``n_nodes`` and ``2 * n_nodes`` Gauss-Hermite
    points; disagreement beyond 1e-10 (relative) raises NormalizationFailed.
    """
    raw = FastFactorSpec(m, nu, epsilon, f_spec, rho_xy, rho_yz).f
    with np.errstate(over="ignore", invalid="ignore"):
        coarse = float(gauss_hermite_average(lambda y: raw(y) ** 2, m, nu, n_nodes))
        fine = float(gauss_hermite_average(lambda y: raw(y) ** 2, m, nu, 2 * n_nodes))
    if not (math.isfinite(coarse) and math.isfinite(fine)) or coarse <= 0.0:
        raise NormalizationFailed(f"<f^2> is not a finite positive number ({coarse!r})")
    if abs(coarse - fine) > NORMALIZATION_TOL * fine:
        raise NormalizationFailed(
            f"Gauss-Hermite estimate of <f^2> not converged: {coarse!r} vs {fine!r}"
        )
    spec = FastFactorSpec(m, nu, epsilon, f_spec, rho_xy, rho_yz, f_scale=math.sqrt(fine))
    y, _ = np.polynomial.hermite.hermgauss(n_nodes)
    fy = spec.f(m + math.sqrt(2.0) * nu * y[np.abs(y) <= 8.0])
    if not np.all(np.isfinite(fy)) or np.any(fy <= 0.0):
        raise InvalidParameter("f_spec", "volatility function must be positive and finite")
    return spec


@dataclass(frozen=True)
class GroupParams:
    """Correction coefficients V1..V4, effective correlation rho_xz*<f> and <f>."""

    v1: float
    v2: float
    v3: float
    v4: float
    rho_eff: float
    f_bar: float = 1.0

    def __post_init__(self):
        for name in ("v1", "v2", "v3", "v4", "rho_eff", "f_bar"):
            _check_finite(name, getattr(self, name))
        if not self.rho_eff**2 < 1.0:
            raise InvalidParameter("rho_eff", "effective correlation must satisfy rho^2 < 1")

    @property
    def v(self) -> tuple:
        return (self.v1, self.v2, self.v3, self.v4)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GroupParams":
        return cls(d["v1"], d["v2"], d["v3"], d["v4"], d["rho_eff"], d.get("f_bar", 1.0))

    @classmethod
    def zero(cls, rho_eff: float) -> "GroupParams":
        return cls(0.0, 0.0, 0.0, 0.0, rho_eff, 1.0)


@dataclass(frozen=True)
class EvalPoint:
    """Evaluation point: time to maturity, log spot, variance and Fourier argument."""

    tau: float
    x: float
    z: float
    s: complex = 1.0

    def __post_init__(self):
        _check_finite("tau", self.tau)
        _check_finite("x", self.x)
        _check_finite("z", self.z)
        if self.tau < 0.0:
            raise InvalidParameter("tau", "must be >= 0")
        if self.z <= 0.0:
            raise InvalidParameter("z", "must be > 0")

    def to_dict(self) -> dict:
        s = complex(self.s)
        return {"tau": self.tau, "x": self.x, "z": self.z, "s": [s.real, s.imag]}

    @classmethod
    def from_dict(cls, d: dict) -> "EvalPoint":
        s = d.get("s", 1.0)
        if isinstance(s, (list, tuple)):
            s = complex(s[0], s[1])
        return cls(d["tau"], d["x"], d["z"], s)
