import csv
import json
import math
import subprocess
import sys

import pytest

from msv.cli import main

BASE = {
    "heston": {"kappa": 1.15, "theta": 0.04, "sigma": 0.2, "rho_xz": -0.6, "r": 0.02},
    "fast_factor": {"m": 0.0, "nu": 0.5, "epsilon": 0.01, "f_spec": "exponential"},
    "correlations": {"rho_xy": -0.4, "rho_yz": 0.2},
    "evaluation": {"tau": 1.0, "x0": 0.0, "z0": 0.04},
    "simulation": {"n_paths": 4000, "n_steps": 32, "seed": 17, "block_size": 1000},
    "validation": {"s_grid": [0.5, 1.0, 2.0]},
}


def write_config(tmp_path, cfg=None, **sections):
    doc = json.loads(json.dumps(cfg or BASE))
    for key, value in sections.items():
        if value is None:
            doc.pop(key, None)
        else:
            doc[key] = value
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return str(path)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(*argv):
    return main([str(a) for a in argv])


def test_charfn_zero_row_and_manifest(tmp_path):
    out = tmp_path / "cf.csv"
    assert run("charfn", write_config(tmp_path), "-o", out, "--s-max", 5, "--s-steps", 6) == 0
    rows = read_rows(out)
    assert len(rows) == 6
    assert [rows[0][k] for k in ("re_psi0", "im_psi0", "re_corrected", "im_corrected")] == ["1", "0", "1", "0"]
    man = json.loads((tmp_path / "cf.csv.manifest.json").read_text())
    assert man["command"] == "charfn"
    assert man["sign_convention_b"] == "FirstListed"
    assert man["a_exponent_variant"] == "Corrected"
    assert len(man["params_digest"]) == 64


def test_charfn_zero_sqrt_eps_is_bitwise_psi0(tmp_path):
    out = tmp_path / "cf.csv"
    assert run("charfn", write_config(tmp_path), "-o", out, "--set", "evaluation.sqrt_eps=0") == 0
    for row in read_rows(out):
        assert row["re_psi0"] == row["re_corrected"] and row["im_psi0"] == row["im_corrected"]


def test_seventeen_significant_digits(tmp_path):
    out = tmp_path / "cf.csv"
    run("charfn", write_config(tmp_path), "-o", out, "--s-steps", 3)
    for row in read_rows(out)[1:]:
        assert float(row["re_psi0"]) == float(repr(float(row["re_psi0"])))
        assert len(row["re_psi0"].lstrip("-0.").replace(".", "").split("e")[0]) >= 15


@pytest.mark.parametrize("content", ["{bad json", "[]", '{"heston": {}}'])
def test_config_errors_exit_2_without_output(tmp_path, content, capsys):
    path = tmp_path / "bad.json"
    path.write_text(content)
    out = tmp_path / "cf.csv"
    assert run("charfn", path, "-o", out) == 2
    assert not out.exists()
    assert "msv charfn" in capsys.readouterr().err


def test_override_errors(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "cf.csv"
    assert run("charfn", cfg, "-o", out, "--set", "heston.sigma=-1") == 2
    assert run("charfn", cfg, "-o", out, "--set", "heston.sigma=abc") == 2
    assert run("charfn", cfg, "-o", out, "--set", "nonsense") == 2
    assert run("charfn", cfg, "-o", out, "--set", "correlations.rho_xz=-0.5") == 2  # conflicts with heston.rho_xz


def test_override_changes_digest(tmp_path):
    cfg = write_config(tmp_path)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run("charfn", cfg, "-o", a, "--s-steps", 3)
    run("charfn", cfg, "-o", b, "--s-steps", 3, "--set", "heston.sigma=0.3")
    digest = lambda p: json.loads(open(str(p) + ".manifest.json").read())["params_digest"]
    assert digest(a) != digest(b)
    assert a.read_text() != b.read_text()


def test_smile_zero_group_params_agree(tmp_path):
    zero = {"v1": 0.0, "v2": 0.0, "v3": 0.0, "v4": 0.0}
    out = tmp_path / "smile.csv"
    assert run("smile", write_config(tmp_path, group_params=zero), "-o", out) == 0
    for row in read_rows(out):
        assert abs(float(row["implied_vol_heston0"]) - float(row["implied_vol_corrected"])) < 1e-8


def test_smile_skew_changes_with_v3(tmp_path):
    gp = {"v1": 0.0, "v2": 0.0, "v3": 0.05, "v4": 0.0}
    out = tmp_path / "smile.csv"
    cfg = write_config(tmp_path, group_params=gp)
    assert run("smile", cfg, "-o", out, "--set", "evaluation.sqrt_eps=0.1") == 0
    diffs = [abs(float(r["implied_vol_heston0"]) - float(r["implied_vol_corrected"])) for r in read_rows(out)]
    assert max(diffs) > 1e-4


def test_smile_single_strike(tmp_path):
    out = tmp_path / "smile.csv"
    assert run("smile", write_config(tmp_path), "-o", out, "--n-strikes", 1, "--strike-min", 1.0, "--strike-max", 1.0) == 0
    assert len(read_rows(out)) == 1


def test_smile_out_of_bounds_vols_are_blank(tmp_path):
    out = tmp_path / "smile.csv"
    assert run("smile", write_config(tmp_path), "-o", out, "--strike-min", 0.01, "--strike-max", 0.01, "--n-strikes", 1) == 0
    row = read_rows(out)[0]
    assert row["implied_vol_heston0"] == ""
    man = json.loads((tmp_path / "smile.csv.manifest.json").read_text())
    assert man["warnings"] >= 1


def test_price_with_monte_carlo(tmp_path):
    out = tmp_path / "price.csv"
    assert run("price", write_config(tmp_path), "-o", out, "--n-strikes", 3, "--mc", "--method", "gil-pelaez") == 0
    rows = read_rows(out)
    assert [r["model"] for r in rows] == ["heston0"] * 3 + ["corrected"] * 3 + ["mc"] * 3
    assert all(r["stderr"] for r in rows[6:]) and not any(r["stderr"] for r in rows[:6])


def test_numerical_failure_exit_3(tmp_path):
    out = tmp_path / "price.csv"
    assert run("price", write_config(tmp_path), "-o", out, "--method", "gil-pelaez", "--set", "evaluation.tau=1e-9") == 3
    assert not out.exists()


def test_group_params_oracles(tmp_path):
    out = tmp_path / "gp.json"
    assert run("group-params", write_config(tmp_path), "-o", out) == 0
    doc = json.loads(out.read_text())
    assert abs(doc["f_bar"] - math.exp(-0.125)) < 1e-8
    assert doc["manifest"]["command"] == "group-params"

    assert run("group-params", write_config(tmp_path), "-o", out, "--set", "correlations.rho_xy=0", "--set", "correlations.rho_yz=0") == 0
    assert [json.loads(out.read_text())[k] for k in ("v1", "v2", "v3", "v4")] == [0.0] * 4

    assert run("group-params", write_config(tmp_path), "-o", out, "--set", "fast_factor.f_spec=constant") == 0
    assert [json.loads(out.read_text())[k] for k in ("v1", "v2", "v3", "v4")] == [0.0] * 4


def test_mc_validate_constant_f_passes(tmp_path):
    out = tmp_path / "mc.csv"
    cfg = write_config(tmp_path, fast_factor={"m": 0.0, "nu": 0.5, "epsilon": 0.01, "f_spec": "constant"})
    assert run("mc-validate", cfg, "-o", out) == 0
    rows = read_rows(out)
    assert list(rows[0]) == ["s", "re_mc", "im_mc", "stderr", "re_psi0", "im_psi0", "re_corrected", "im_corrected", "pass"]
    assert all(r["pass"] == "true" for r in rows)


def test_mc_validate_failure_exit_4(tmp_path):
    out = tmp_path / "mc.csv"
    gp = {"v1": 0.0, "v2": 0.0, "v3": 3.0, "v4": 0.0}
    assert run("mc-validate", write_config(tmp_path, group_params=gp), "-o", out) == 4
    assert any(r["pass"] == "false" for r in read_rows(out))


def test_mc_validate_config_errors(tmp_path):
    out = tmp_path / "mc.csv"
    assert run("mc-validate", write_config(tmp_path), "-o", out, "--set", "simulation.n_paths=0") == 2
    assert run("mc-validate", write_config(tmp_path, simulation=None), "-o", out) == 2
    assert run("mc-validate", write_config(tmp_path), "-o", out, "--set", "simulation.t_horizon=2.0") == 2


def test_mc_validate_thread_independent(tmp_path, monkeypatch):
    cfg = write_config(tmp_path)
    bodies = []
    for threads in ("1", "3"):
        monkeypatch.setenv("MSV_THREADS", threads)
        out = tmp_path / f"mc{threads}.csv"
        run("mc-validate", cfg, "-o", out)
        bodies.append(out.read_bytes())
    assert bodies[0] == bodies[1]


def test_module_entry_point(tmp_path):
    out = tmp_path / "cf.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "msv.cli", "charfn", write_config(tmp_path), "-o", str(out), "--s-steps", "2"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert out.read_text().startswith("s,re_psi0,im_psi0,re_corrected,im_corrected\n")
