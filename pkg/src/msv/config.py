"""JSON run configuration with dotted-path overrides."""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import InvalidParameter
from .mc import SimConfig
from .params import (
    CorrelationMatrix,
    FastFactorSpec,
    GroupParams,
    HestonParams,
    validate_correlations,
    validate_heston,
)


class ConfigError(InvalidParameter):
    def __init__(self, message: str, field_name: str = "config"):
        super().__init__(field_name, message)


DEFAULT_S_GRID = (0.5, 1.0, 2.0, 5.0)


@dataclass(frozen=True)
class Evaluation:
    tau: float = 1.0
    x0: float = 0.0
    z0: Optional[float] = None  # defaults to theta
    y0: Optional[float] = None  # defaults to m
    sqrt_eps: Optional[float] = None  # defaults to sqrt(epsilon)


@dataclass(frozen=True)
class RunConfig:
    heston: HestonParams
    fast: FastFactorSpec
    corr: CorrelationMatrix
    tau: float
    x0: float
    z0: float
    y0: float
    sqrt_eps: float
    group_params: Optional[GroupParams] = None
    simulation: Optional[SimConfig] = None
    s_grid: tuple = DEFAULT_S_GRID
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def digest(self) -> str:
        return params_digest(self.raw)


def params_digest(raw: dict) -> str:
    return hashlib.sha256(json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def parse_override(text: str):
    """``a.b.c=value`` -> (["a", "b", "c"], value); the value is read as JSON when possible."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key.path=value")
    key, value = text.split("=", 1)
    path = [k for k in key.strip().split(".") if k]
    if not path:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    return path, parsed


def apply_overrides(raw: dict, overrides) -> dict:
    out = copy.deepcopy(raw)
    for text in overrides or ():
        path, value = parse_override(text)
        node = out
        for k in path[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {'.'.join(path)!r} crosses a non-object")
        node[path[-1]] = value
    return out


def _section(raw, name, required=True) -> dict:
    sec = raw.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"missing section {name!r}", name)
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be an object", name)
    return sec


def _merged_correlations(heston: dict, fast: dict, corr: dict) -> dict:
    """Each correlation may be given in its model section or under "correlations", not both differently."""
    out = {}
    for key, home in (("rho_xz", heston), ("rho_xy", fast), ("rho_yz", fast)):
        values = {float(v) for v in (home.get(key), corr.get(key)) if v is not None}
        if len(values) > 1:
            raise ConfigError(f"{key} given twice with different values", key)
        out[key] = values.pop() if values else 0.0
    return out


def _build(cls, section: dict, name: str, **extra):
    try:
        return cls(**section, **extra)
    except TypeError as exc:
        raise ConfigError(f"{name}: {exc}", name) from exc


def build_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a JSON object")
    heston_raw = dict(_section(raw, "heston"))
    fast_raw = dict(_section(raw, "fast_factor"))
    corr_raw = _section(raw, "correlations", required=False)
    rhos = _merged_correlations(heston_raw, fast_raw, corr_raw)
    heston_raw["rho_xz"] = rhos["rho_xz"]
    fast_raw["rho_xy"], fast_raw["rho_yz"] = rhos["rho_xy"], rhos["rho_yz"]

    heston = validate_heston(_build(HestonParams, heston_raw, "heston"))
    corr = validate_correlations(rhos["rho_xy"], rhos["rho_xz"], rhos["rho_yz"])
    unknown = set(fast_raw) - {"m", "nu", "epsilon", "f_spec", "rho_xy", "rho_yz"}
    if unknown:
        raise ConfigError(f"fast_factor: unknown fields {sorted(unknown)}", "fast_factor")
    try:
        fast = FastFactorSpec.from_dict(fast_raw)
    except KeyError as exc:
        raise ConfigError(f"fast_factor: missing field {exc}", "fast_factor") from exc

    ev = _build(Evaluation, _section(raw, "evaluation", required=False), "evaluation")
    z0 = heston.theta if ev.z0 is None else float(ev.z0)
    y0 = fast.m if ev.y0 is None else float(ev.y0)
    sqrt_eps = math.sqrt(fast.epsilon) if ev.sqrt_eps is None else float(ev.sqrt_eps)
    if not ev.tau > 0.0:
        raise ConfigError("must be > 0", "evaluation.tau")
    if not z0 > 0.0:
        raise ConfigError("must be > 0", "evaluation.z0")
    if not sqrt_eps >= 0.0:
        raise ConfigError("must be >= 0", "evaluation.sqrt_eps")

    gp = None
    gp_raw = _section(raw, "group_params", required=False)
    if gp_raw:
        gp_raw = dict(gp_raw)
        gp_raw.setdefault("f_bar", fast.f_bar)
        gp_raw.setdefault("rho_eff", heston.rho_xz * gp_raw["f_bar"])
        gp = _build(GroupParams, gp_raw, "group_params")

    sim = None
    sim_raw = _section(raw, "simulation", required=False)
    if sim_raw:
        sim_raw = dict(sim_raw)
        sim_raw.setdefault("t_horizon", ev.tau)
        if sim_raw["t_horizon"] != ev.tau:
            raise ConfigError("simulation.t_horizon must equal evaluation.tau", "simulation.t_horizon")
        sim = _build(SimConfig, sim_raw, "simulation")

    val = _section(raw, "validation", required=False)
    s_grid = tuple(float(s) for s in val.get("s_grid", DEFAULT_S_GRID))
    if not s_grid:
        raise ConfigError("must not be empty", "validation.s_grid")

    return RunConfig(heston, fast, corr, float(ev.tau), float(ev.x0), z0, y0, sqrt_eps, gp, sim, s_grid, raw)


def load_config(path, overrides=()) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return build_config(apply_overrides(raw, overrides))
