"""Command-line front end: ``msv {charfn,smile,price,mc-validate,group-params}``.

Every command reads one JSON config (see README), accepts ``--set key.path=value``
overrides and writes its output atomically together with a ``<out>.manifest.json``
sidecar (JSON outputs embed the manifest instead). Exit codes: 0 success,
2 configuration error, 3 numerical error, 4 validation failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .correction import SIGN_CONVENTION_B, corrected_cf_at, match_exponent_variant
from .errors import CorrelationNotPD, InvalidParameter, MSVError, OutOfBounds
from .group_params import DEFAULT_GRID_SIZE, compute_group_params, stationary_averages
from .heston_cf import psi0_at
from .mc import estimate_cf, estimate_price, simulate, thread_count
from .params import DEFAULT_GH_NODES, GroupParams
from .pricer import implied_vol, price_cos, price_gil_pelaez

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VALIDATION = 0, 2, 3, 4

_VARIANT_NAMES = {"corrected": "Corrected", "as_printed": "AsPrinted"}


class _Exit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def fmt(v) -> str:
    """17 significant digits; empty field for None."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return f"{float(v):.17g}"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([c if isinstance(c, str) else fmt(c) for c in row])
    return buf.getvalue()


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".msv-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def group_params_for(cfg: RunConfig) -> GroupParams:
    return cfg.group_params if cfg.group_params is not None else compute_group_params(cfg.fast, cfg.heston)


def manifest(command: str, cfg: RunConfig, g: GroupParams, warnings: int = 0, **extra) -> dict:
    out = {
        "command": command,
        "params_digest": cfg.digest,
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "sign_convention_b": SIGN_CONVENTION_B,
        "a_exponent_variant": _VARIANT_NAMES[match_exponent_variant(cfg.heston, g)],
        "warnings": warnings,
    }
    out.update(extra)
    return out


def _emit_csv(out_path, header, rows, man):
    _atomic_write(out_path, csv_text(header, rows))
    _atomic_write(out_path + ".manifest.json", json.dumps(man, indent=2) + "\n")


def _models(cfg: RunConfig, g: GroupParams, tau: float):
    def heston0(s):
        return psi0_at(tau, cfg.x0, cfg.z0, s, cfg.heston, g.rho_eff)

    def corrected(s):
        return corrected_cf_at(tau, cfg.x0, cfg.z0, s, cfg.heston, g, cfg.sqrt_eps)

    return {"heston0": heston0, "corrected": corrected}


def cmd_charfn(cfg: RunConfig, s_min: float, s_max: float, s_steps: int, out_path: str) -> int:
    if s_steps < 1 or s_max < s_min:
        raise _Exit(EXIT_CONFIG, "need s_steps >= 1 and s_max >= s_min")
    g = group_params_for(cfg)
    s = np.linspace(s_min, s_max, s_steps)
    models = _models(cfg, g, cfg.tau)
    p0 = np.atleast_1d(models["heston0"](s))
    pc = np.atleast_1d(models["corrected"](s))
    rows = [(s[k], p0[k].real, p0[k].imag, pc[k].real, pc[k].imag) for k in range(s.size)]
    _emit_csv(out_path, ["s", "re_psi0", "im_psi0", "re_corrected", "im_corrected"], rows, manifest("charfn", cfg, g))
    return EXIT_OK


def _price(cf, strikes, cfg: RunConfig, tau: float, method: str):
    if method == "cos":
        return np.atleast_1d(price_cos(cf, strikes, tau, cfg.heston.r, cfg.x0))
    return np.atleast_1d(price_gil_pelaez(cf, strikes, tau, cfg.heston.r, cfg.x0))


def _vol_or_none(price, strike, cfg: RunConfig, tau: float):
    try:
        return implied_vol(float(price), float(strike), tau, cfg.heston.r, float(np.exp(cfg.x0)))
    except OutOfBounds:
        return None


def _strike_grid(strike_min, strike_max, n_strikes):
    if n_strikes < 1 or strike_min <= 0.0 or strike_max < strike_min:
        raise _Exit(EXIT_CONFIG, "need n_strikes >= 1 and 0 < strike_min <= strike_max")
    return np.linspace(strike_min, strike_max, n_strikes)


def cmd_smile(cfg: RunConfig, strike_min, strike_max, n_strikes, out_path, method="cos") -> int:
    strikes = _strike_grid(strike_min, strike_max, n_strikes)
    g = group_params_for(cfg)
    models = _models(cfg, g, cfg.tau)
    prices = {name: _price(cf, strikes, cfg, cfg.tau, method) for name, cf in models.items()}
    warnings = 0
    rows = []
    for k, strike in enumerate(strikes):
        vols = {name: _vol_or_none(prices[name][k], strike, cfg, cfg.tau) for name in models}
        warnings += sum(v is None for v in vols.values())
        rows.append((strike, prices["heston0"][k], vols["heston0"], prices["corrected"][k], vols["corrected"]))
    header = ["strike", "price_heston0", "implied_vol_heston0", "price_corrected", "implied_vol_corrected"]
    _emit_csv(out_path, header, rows, manifest("smile", cfg, g, warnings, method=method))
    return EXIT_OK


def cmd_price(cfg: RunConfig, strike_min, strike_max, n_strikes, out_path, method="cos", with_mc=False, threads=None) -> int:
    strikes = _strike_grid(strike_min, strike_max, n_strikes)
    g = group_params_for(cfg)
    rows = []
    warnings = 0
    for name, cf in _models(cfg, g, cfg.tau).items():
        for strike, price in zip(strikes, _price(cf, strikes, cfg, cfg.tau, method)):
            vol = _vol_or_none(price, strike, cfg, cfg.tau)
            warnings += vol is None
            rows.append((strike, price, vol, None, name))
    extra = {"method": method}
    if with_mc:
        batch = _simulate(cfg, threads)
        mc_prices, mc_err = estimate_price(batch, strikes, cfg.heston.r, cfg.tau)
        for strike, price, err in zip(strikes, mc_prices, mc_err):
            vol = _vol_or_none(price, strike, cfg, cfg.tau)
            warnings += vol is None
            rows.append((strike, price, vol, err, "mc"))
        extra["model_hash"] = batch.model_hash
    header = ["strike", "price", "implied_vol", "stderr", "model"]
    _emit_csv(out_path, header, rows, manifest("price", cfg, g, warnings, **extra))
    return EXIT_OK


def _simulate(cfg: RunConfig, threads=None):
    if cfg.simulation is None:
        raise _Exit(EXIT_CONFIG, "config has no 'simulation' section")
    return simulate(cfg.heston, cfg.fast, cfg.corr, cfg.x0, cfg.y0, cfg.z0, cfg.simulation, threads=threads)


def cmd_mc_validate(cfg: RunConfig, out_path: str, threads=None) -> int:
    g = group_params_for(cfg)
    batch = _simulate(cfg, threads)
    s = np.asarray(cfg.s_grid)
    est, err = estimate_cf(batch, s)
    models = _models(cfg, g, cfg.simulation.t_horizon)
    p0 = np.atleast_1d(models["heston0"](s))
    pc = np.atleast_1d(models["corrected"](s))
    ok = np.abs(est - pc) <= 3.0 * err
    rows = [
        (s[k], est[k].real, est[k].imag, err[k], p0[k].real, p0[k].imag, pc[k].real, pc[k].imag, bool(ok[k]))
        for k in range(s.size)
    ]
    header = ["s", "re_mc", "im_mc", "stderr", "re_psi0", "im_psi0", "re_corrected", "im_corrected", "pass"]
    man = manifest(
        "mc-validate", cfg, g, model_hash=batch.model_hash, threads=thread_count(threads), failed_rows=int((~ok).sum())
    )
    _emit_csv(out_path, header, rows, man)
    if not ok.all():
        raise _Exit(EXIT_VALIDATION, f"{int((~ok).sum())} of {s.size} rows outside 3 standard errors")
    return EXIT_OK


def cmd_group_params(cfg: RunConfig, out_path: str, grid_size: int = DEFAULT_GRID_SIZE) -> int:
    g = compute_group_params(cfg.fast, cfg.heston, grid_size=grid_size)
    avgs = stationary_averages(cfg.fast, grid_size)
    doc = g.to_dict()
    doc["averages"] = {k: avgs[k] for k in ("dphi", "dxi", "f_dphi", "f_dxi")}
    doc["grid_size"] = grid_size
    doc["gauss_hermite_nodes"] = DEFAULT_GH_NODES
    doc["manifest"] = manifest("group-params", cfg, g)
    _atomic_write(out_path, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("config", help="JSON config file")
        sp.add_argument("-o", "--out", required=True, help="output path")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY.PATH=VALUE")
        return sp

    sp = add("charfn", "tabulate psi0 and the corrected characteristic function")
    sp.add_argument("--s-min", type=float, default=0.0)
    sp.add_argument("--s-max", type=float, default=10.0)
    sp.add_argument("--s-steps", type=int, default=101)

    for name, help_text in (("smile", "implied-vol smile, heston0 vs corrected"), ("price", "option prices")):
        sp = add(name, help_text)
        sp.add_argument("--strike-min", type=float, default=0.7)
        sp.add_argument("--strike-max", type=float, default=1.3)
        sp.add_argument("--n-strikes", type=int, default=13)
        sp.add_argument("--method", choices=("cos", "gil-pelaez"), default="cos")
    sp.add_argument("--mc", action="store_true", help="add Monte Carlo prices from the simulation section")

    add("mc-validate", "compare Monte Carlo CF estimates with the analytic models")
    sp = add("group-params", "compute V1..V4 from the fast factor")
    sp.add_argument("--grid-size", type=int, default=DEFAULT_GRID_SIZE)
    return parser


def _dispatch(args, cfg: RunConfig) -> int:
    if args.command == "charfn":
        return cmd_charfn(cfg, args.s_min, args.s_max, args.s_steps, args.out)
    if args.command == "smile":
        return cmd_smile(cfg, args.strike_min, args.strike_max, args.n_strikes, args.out, args.method)
    if args.command == "price":
        return cmd_price(cfg, args.strike_min, args.strike_max, args.n_strikes, args.out, args.method, args.mc)
    if args.command == "mc-validate":
        return cmd_mc_validate(cfg, args.out)
    return cmd_group_params(cfg, args.out, args.grid_size)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        try:
            cfg = load_config(args.config, args.overrides)
        except (MSVError, ValueError, TypeError, KeyError) as exc:
            raise _Exit(EXIT_CONFIG, f"configuration error: {exc}") from exc
        try:
            return _dispatch(args, cfg)
        except (InvalidParameter, CorrelationNotPD) as exc:
            raise _Exit(EXIT_CONFIG, f"{type(exc).__name__}: {exc}") from exc
        except (MSVError, ArithmeticError) as exc:
            raise _Exit(EXIT_NUMERICAL, f"{type(exc).__name__}: {exc}") from exc
    except _Exit as exc:
        print(f"msv {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
