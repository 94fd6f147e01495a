"""Monte Carlo simulation of the full (X, Y, Z) system.

Scheme per macro step of length dt:

* Z: full-truncation Euler, Z += kappa (theta - Z+) dt + sigma sqrt(Z+) dW^z.
* X: log-Euler with f(Y), Z+ frozen at the start of the step.
* Y: exact OU transitions with the clock Z+/eps frozen, split into substeps so
  that (Z+/eps) dt_sub <= y_substep_target. The W^y increment of the macro step
  is split over substeps by a Brownian bridge, and each exact OU transition is
  drawn jointly Gaussian with its substep increment.

Random numbers come from Philox streams keyed by (seed, block index); blocks of
``block_size`` paths are simulated independently, so the output does not depend
on how many threads run them.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter, InvalidState
from .params import CorrelationMatrix, FastFactorSpec, HestonParams

THREADS_ENV = "MSV_THREADS"


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 200_000
    n_steps: int = 512
    t_horizon: float = 1.0
    seed: int = 20111
    y_substep_target: float = 0.1
    block_size: int = 16384

    def __post_init__(self):
        if not isinstance(self.n_paths, int) or self.n_paths < 1:
            raise InvalidParameter("n_paths", "must be an integer >= 1")
        if not isinstance(self.n_steps, int) or self.n_steps < 1:
            raise InvalidParameter("n_steps", "must be an integer >= 1")
        if not (isinstance(self.t_horizon, (int, float)) and self.t_horizon > 0):
            raise InvalidParameter("t_horizon", "must be > 0")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise InvalidParameter("seed", "must be a 64-bit unsigned integer")
        if not 0.0 < self.y_substep_target <= 1.0:
            raise InvalidParameter("y_substep_target", "must lie in (0, 1]")
        if not isinstance(self.block_size, int) or self.block_size < 1:
            raise InvalidParameter("block_size", "must be an integer >= 1")

    def to_dict(self) -> dict:
        return {
            "n_paths": self.n_paths,
            "n_steps": self.n_steps,
            "t_horizon": self.t_horizon,
            "seed": self.seed,
            "y_substep_target": self.y_substep_target,
            "block_size": self.block_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        return cls(**d)


@dataclass(frozen=True)
class PathBatch:
    x_terminal: np.ndarray = field(repr=False)
    config: SimConfig
    model_hash: str

    def __post_init__(self):
        if self.x_terminal.shape != (self.config.n_paths,):
            raise InvalidState("x_terminal length does not match n_paths")
        self.x_terminal.setflags(write=False)

    def __len__(self):
        return self.x_terminal.size


def thread_count(threads=None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "0") or 0)
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads


def model_digest(p: HestonParams, spec: FastFactorSpec, corr: CorrelationMatrix, x0, y0, z0) -> str:
    f_name = spec.f_spec if isinstance(spec.f_spec, str) else getattr(spec.f_spec, "__qualname__", repr(spec.f_spec))
    payload = {
        "heston": p.to_dict(),
        "fast_factor": {"m": spec.m, "nu": spec.nu, "epsilon": spec.epsilon, "f_spec": f_name, "f_scale": spec.f_scale},
        "correlations": corr.to_dict(),
        "state": [x0, y0, z0],
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(block << 64) | seed))


def _simulate_block(block, n, p, spec, chol, x0, y0, z0, cfg):
    rng = _block_rng(cfg.seed, block)
    dt = cfg.t_horizon / cfg.n_steps
    sqdt = math.sqrt(dt)
    eps = spec.epsilon
    nu = spec.nu
    x = np.full(n, float(x0))
    y = np.full(n, float(y0))
    z = np.full(n, float(z0))
    for _ in range(cfg.n_steps):
        zp = np.maximum(z, 0.0)
        sz = np.sqrt(zp)
        dw = chol @ rng.standard_normal((3, n)) * sqdt
        fy = spec.f(y)
        x += (p.r - 0.5 * fy * fy * zp) * dt + fy * sz * dw[0]

        lam = zp / eps
        n_sub = max(1, math.ceil(float(np.max(lam)) * dt / cfg.y_substep_target))
        dts = dt / n_sub
        if n_sub == 1:
            sub_dw = dw[1][None, :]
        else:
            eta = rng.standard_normal((n_sub, n))
            sub_dw = dw[1] / n_sub + math.sqrt(dts) * (eta - eta.mean(axis=0))
        decay = np.exp(-lam * dts)
        with np.errstate(divide="ignore", invalid="ignore"):
            # cov(I, dW)/dts with I the OU noise over the substep; -> nu sqrt(2 lam) as lam -> 0
            a = np.where(lam > 0.0, nu * math.sqrt(2.0) * np.sqrt(lam) * (-np.expm1(-lam * dts)) / (lam * dts), 0.0)
        var = nu * nu * (-np.expm1(-2.0 * lam * dts))
        resid = np.sqrt(np.maximum(var - a * a * dts, 0.0))
        for j in range(n_sub):
            zeta = rng.standard_normal(n)
            y = spec.m + (y - spec.m) * decay + a * sub_dw[j] + resid * zeta

        z += p.kappa * (p.theta - zp) * dt + p.sigma * sz * dw[2]
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.all(np.isfinite(z))):
        raise InvalidState(f"non-finite state in block {block}")
    return x


def simulate(
    p: HestonParams,
    spec: FastFactorSpec,
    corr: CorrelationMatrix,
    x0: float,
    y0: float,
    z0: float,
    cfg: SimConfig,
    threads=None,
) -> PathBatch:
    """Terminal log prices X_T of ``cfg.n_paths`` paths started at (x0, y0, z0)."""
    if not z0 > 0.0:
        raise InvalidParameter("z0", "must be > 0")
    if (corr.rho_xz, corr.rho_xy, corr.rho_yz) != (p.rho_xz, spec.rho_xy, spec.rho_yz):
        raise InvalidParameter("correlations", "correlation matrix disagrees with model parameters")
    chol = np.asarray(corr.chol)
    starts = list(range(0, cfg.n_paths, cfg.block_size))
    sizes = [min(cfg.block_size, cfg.n_paths - s0) for s0 in starts]

    def run(i):
        with np.errstate(over="ignore", invalid="ignore"):  # non-finite states are reported below
            return _simulate_block(i, sizes[i], p, spec, chol, x0, y0, z0, cfg)

    n_threads = min(thread_count(threads), len(starts))
    if n_threads == 1:
        parts = [run(i) for i in range(len(starts))]
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            parts = list(pool.map(run, range(len(starts))))
    x_t = np.concatenate(parts)
    return PathBatch(x_t, cfg, model_digest(p, spec, corr, x0, y0, z0))


def estimate_cf(batch: PathBatch, s_grid):
    """Sample mean of exp(i s X_T) and its standard error for each s."""
    x = batch.x_terminal
    n = x.size
    if n == 0:
        raise InvalidState("empty batch")
    s_grid = np.atleast_1d(np.asarray(s_grid, dtype=float))
    est = np.empty(s_grid.size, dtype=complex)
    err = np.empty(s_grid.size)
    ddof = 1 if n > 1 else 0
    for k, s in enumerate(s_grid):
        phase = s * x
        c, si = np.cos(phase), np.sin(phase)
        est[k] = complex(c.mean(), si.mean())
        err[k] = math.sqrt((c.var(ddof=ddof) + si.var(ddof=ddof)) / n)
    return est, err


def _payoff_stats(payoff, r, t):
    n = payoff.size
    disc = math.exp(-r * t)
    sd = payoff.std(ddof=1) if n > 1 else 0.0
    return disc * payoff.mean(), disc * sd / math.sqrt(n)


def estimate_price(batch: PathBatch, strikes, r: float, t: float):
    """Discounted call prices e^{-rt} mean((e^{X_T} - K)+) with standard errors."""
    spot_t = np.exp(batch.x_terminal)
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    if np.any(strikes < 0.0):
        raise InvalidParameter("strikes", "must be >= 0")
    out = [_payoff_stats(np.maximum(spot_t - k, 0.0), r, t) for k in strikes]
    return np.array([o[0] for o in out]), np.array([o[1] for o in out])


def estimate_put(batch: PathBatch, strikes, r: float, t: float):
    spot_t = np.exp(batch.x_terminal)
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    out = [_payoff_stats(np.maximum(k - spot_t, 0.0), r, t) for k in strikes]
    return np.array([o[0] for o in out]), np.array([o[1] for o in out])
