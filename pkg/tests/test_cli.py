import json
import math
import subprocess
import sys

import numpy as np
import pytest

from pwgauss import config
from pwgauss.cli import main
from pwgauss.geometry import SpectrumDomain
from pwgauss.nodes import read_nodes


def write_cfg(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_gen_lattice_default(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["gen", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "N = 129" in text
    q = float(text.split("q = ")[1].split()[0])
    assert q == pytest.approx(math.pi, rel=1e-14)
    nd = read_nodes(out / "nodes.csv")
    assert len(nd) == 129 and (out / "nodes.json").exists()
    assert (out / "config.resolved.json").exists()


def test_gen_is_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, {"nodes": {"kind": "kadec", "magnitude": 0.5, "seed": 3}})
    assert main(["gen", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["gen", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    for name in ("nodes.csv", "nodes.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    ca = json.loads((tmp_path / "a" / "config.resolved.json").read_text())
    cb = json.loads((tmp_path / "b" / "config.resolved.json").read_text())
    ca.pop("output_dir"), cb.pop("output_dir")
    assert ca == cb


def test_gen_kadec_quarter_bound_exit_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"nodes": {"kind": "kadec", "magnitude": math.pi / 4}})
    assert main(["gen", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "Kadec" in capsys.readouterr().err


def test_interp_standard_and_zero(tmp_path):
    out = str(tmp_path)
    assert main(["gen", "--out", out]) == 0
    assert main(["interp", "--out", out, "--lambda", "0.25"]) == 0
    res = json.loads((tmp_path / "residual.json").read_text())
    assert res["residual_inf"] <= 1e-10 * res["samples_inf"]
    doc = json.loads((tmp_path / "interpolant.json").read_text())
    assert set(doc) == {"lambda", "nodes_ref", "coefficients", "diagnostics"}
    cfg = write_cfg(tmp_path, {"function": {"kind": "zero"}, "dump_gram": True})
    assert main(["interp", "--config", cfg, "--out", out, "--lambda", "0.25"]) == 0
    doc = json.loads((tmp_path / "interpolant.json").read_text())
    assert all(c == 0 for c in doc["coefficients"])
    raw = (tmp_path / "gram.bin").read_bytes()
    assert raw[:8] == b"PWGRAM01" and int.from_bytes(raw[8:16], "little") == 129


def test_interp_samples_mode(tmp_path):
    out = str(tmp_path)
    cfg = write_cfg(tmp_path, {"nodes": {"extent": 2},
                               "function": {"kind": "samples", "values": [0, 1, 2, 1, 0]}})
    assert main(["gen", "--config", cfg, "--out", out]) == 0
    assert main(["interp", "--config", cfg, "--out", out, "--lambda", "0.5"]) == 0
    res = json.loads((tmp_path / "residual.json").read_text())
    assert res["node_max_error"] <= 1e-10 * 2


def test_interp_missing_nodes_exit_1(tmp_path, capsys):
    assert main(["interp", "--out", str(tmp_path), "--lambda", "0.25"]) == 1
    assert "not found" in capsys.readouterr().err


def test_interp_needs_lambda(tmp_path):
    assert main(["gen", "--out", str(tmp_path)]) == 0
    assert main(["interp", "--out", str(tmp_path)]) == 1


def test_interp_factorization_failure_exit_3(tmp_path):
    cfg = write_cfg(tmp_path, {"nodes": {"spacing": 0.5, "extent": 60}})
    assert main(["gen", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert main(["interp", "--config", cfg, "--out", str(tmp_path), "--lambda", "0.005"]) == 3


def test_usage_errors_exit_1(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["bogus"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["interp", "--lambda", "abc"])
    assert info.value.code == 1
    assert main(["gen", "--config", str(tmp_path / "missing.json")]) == 1
    bad = write_cfg(tmp_path, {"nodez": {}})
    assert main(["gen", "--config", bad, "--out", str(tmp_path)]) == 1
    (tmp_path / "broken.json").write_text("{not json")
    assert main(["gen", "--config", str(tmp_path / "broken.json")]) == 1


def test_sweep_standard_and_rate(tmp_path, capsys):
    out = str(tmp_path)
    assert main(["sweep", "--out", out]) == 0
    fit = json.loads((tmp_path / "ratefit.json").read_text())
    for key in ("slope", "intercept", "theoretical_exponent", "r_squared", "verdict"):
        assert key in fit
    assert fit["verdict"] is True and fit["slope"] <= -0.60
    assert fit["theoretical_exponent"] == -0.75
    header = (tmp_path / "errors.csv").read_text().splitlines()[0]
    assert header == "lambda,N,R,W,sup_error,l2_error,in_band_error,out_band_energy,coeff_l2," \
                     "cond_est,status"
    assert (tmp_path / "truncation.csv").exists()
    resolved = json.loads((tmp_path / "config.resolved.json").read_text())
    assert resolved["lambdas"] == config.DEFAULTS["lambdas"]
    capsys.readouterr()
    assert main(["rate", "--out", out]) == 0
    assert json.loads((tmp_path / "ratefit.json").read_text())["slope"] == fit["slope"]


def test_sweep_verdict_false_exit_4(tmp_path):
    # a negative tolerance demands a slope steeper than any measured one
    cfg = write_cfg(tmp_path, {"rate_tolerance": -5.0, "lambdas": [0.5, 0.35, 0.25, 0.18]})
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 4


def test_sweep_all_failed_exit_3(tmp_path):
    cfg = write_cfg(tmp_path, {"nodes": {"spacing": 0.5, "extent": 40},
                               "truncation": {"enabled": False},
                               "lambdas": [0.01, 0.009, 0.008, 0.007]})
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 3


def test_sweep_hypothesis_warnings_on_stderr(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {
        "domain": {"shape": "box", "halfwidths": [0.7071067811865476] * 2, "dim": 2},
        "nodes": {"spacing": math.pi * math.sqrt(2), "extent": 4},
        "function": {"beta": 0.3, "n_atoms": 1},
        "lambdas": [0.5, 0.35, 0.25, 0.125],
        "truncation": {"enabled": False}, "grid_density": 65})
    code = main(["sweep", "--config", cfg, "--out", str(tmp_path), "--threads", "2"])
    err = capsys.readouterr().err
    assert "sqrt(2/3)" in err and "sqrt(3 delta^2 - 2)" in err
    fit = json.loads((tmp_path / "ratefit.json").read_text())
    assert fit["beyond_theorem"] is True and code in (0, 4)


def test_selftest_pass_fault_and_determinism(capsys):
    assert main(["selftest"]) == 0
    first = capsys.readouterr().out
    assert main(["selftest"]) == 0
    assert capsys.readouterr().out == first
    assert main(["selftest", "--inject-fault", "gram-symmetry"]) != 0
    out = capsys.readouterr().out
    assert "FAIL kernel.gram_symmetry" in out
    assert "failed: kernel.gram_symmetry" in out


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "pwgauss", "gen", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "N = 129" in r.stdout


# -- config -------------------------------------------------------------------

def test_config_defaults_and_merge():
    cfg = config.resolve({"nodes": {"spacing": 2.0}})
    assert cfg["nodes"]["spacing"] == 2.0 and cfg["nodes"]["extent"] == 64
    assert cfg["domain"] == {"shape": "box", "halfwidths": [1.0], "dim": 1}
    with pytest.raises(config.ConfigError):
        config.resolve({"nodes": {"spacingg": 1}})
    with pytest.raises(config.ConfigError):
        config.resolve({"domain": {"shape": "cone"}})
    with pytest.raises(config.ConfigError):
        config.resolve({"threads": 0})


def test_config_function_kinds(tmp_path):
    cfg = config.resolve({"function": {"kind": "explicit", "beta": 1.0, "atoms": [
        {"a": [-1.0], "b": [1.0], "t": [0.0], "c": [math.pi, 0.0]}]}})
    f = config.function_of(cfg)
    assert f(np.array([0.0])) == pytest.approx(1.0)
    path = f.save(tmp_path / "f.json")
    cfg = config.resolve({"function": {"kind": "file", "path": str(path)}})
    assert config.function_of(cfg) == f


def test_hypothesis_warnings_text():
    assert config.hypothesis_warnings(SpectrumDomain.box([1.0]), 0.5) == []
    w = config.hypothesis_warnings(SpectrumDomain.box([1.0]), 1.2)
    assert len(w) == 1 and "0 < beta < sqrt(3 delta^2 - 2)" in w[0]
    w = config.hypothesis_warnings(SpectrumDomain.ball(0.8, 2), 0.1)
    assert any("delta in (sqrt(2/3), 1]" in m for m in w)
    w = config.hypothesis_warnings(SpectrumDomain.box([1.0, 1.0]), 0.5, "kadec")
    assert any("B_2" in m for m in w) and any("Kadec" in m for m in w)
