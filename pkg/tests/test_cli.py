"""Command-line interface: subcommands, output files, exit codes."""

import json
import subprocess
import sys

import numpy as np
import pytest

from medest.cli import main


def _write(tmp_path, name, d):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return str(p)


def _scalar_dict(**over):
    d = {
        "plant": {"A": [[0.0]], "B": [[0.0]], "C_blocks": [[[1.0]]] * 5},
        "topology": {"preset": "ring", "n": 5},
        "estimator": {"kappa": 1.0, "gamma": 2.0, "variant": "lyapunov",
                      "P": [[1.0]]},
        "attack": {"q": 1, "signals": [{"kind": "none"}] * 4
                   + [{"kind": "constant_bias", "value": 2.0}]},
        "initial": {"xhat": {"kind": "box", "low": -1.0, "high": 1.0}},
        "sim": {"horizon": 5.0, "dt": 0.01, "seed": 3},
    }
    d.update(over)
    return d


def test_audit_pass_and_fail(tmp_path, capsys):
    assert main(["audit", "threeinertia"]) == 0
    out = capsys.readouterr().out
    assert "attack budget: PASS" in out
    assert "network connectivity: PASS" in out
    assert "indicator column counts" in out

    d = _scalar_dict()
    d["attack"]["q"] = 0
    path = _write(tmp_path, "overbudget.json", d)
    assert main(["audit", path]) == 1
    assert "attack budget: FAIL" in capsys.readouterr().out


def test_median_run_and_csv(tmp_path, capsys):
    out_csv = str(tmp_path / "median.csv")
    code = main(["median", "--z", "1,2,3,4,100", "--gamma", "10",
                 "--out", out_csv])
    assert code == 0
    out = capsys.readouterr().out
    assert "target median set = [3, 3]" in out
    assert "guaranteed tail radius = 0.32361" in out
    assert "PASS" in out

    data = np.genfromtxt(out_csv, delimiter=",", names=True)
    assert data.dtype.names == ("t", "x1", "x2", "x3", "x4", "x5",
                                "dist_to_median_set")
    assert data["dist_to_median_set"][-1] <= 0.32361


def test_median_bound_only(capsys):
    assert main(["median", "--n", "4", "--gamma", "1",
                 "--topology", "complete"]) == 0
    out = capsys.readouterr().out
    assert "lambda_2 = 4.0000000" in out
    assert "median consensus tail radius = 1.00000" in out


def test_median_needs_values_or_n(capsys):
    assert main(["median", "--gamma", "1"]) == 2


def test_simulate_writes_outputs(tmp_path, capsys):
    code = main(["simulate", "scalar_lyapunov", "--out-dir", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "guaranteed estimation tail radius" in out
    assert "PASS" in out
    csv_path = tmp_path / "scalar_lyapunov_log.csv"
    side_path = tmp_path / "scalar_lyapunov_log.json"
    assert csv_path.exists() and side_path.exists()
    side = json.loads(side_path.read_text())
    assert side["assumption_violating"] is False
    header = csv_path.read_text().splitlines()[0].split(",")
    assert header == side["csv_columns"]


def test_simulate_respects_out_dir_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("MEDEST_OUT_DIR", str(tmp_path / "envout"))
    assert main(["simulate", "scalar_lyapunov"]) == 0
    assert (tmp_path / "envout" / "scalar_lyapunov_log.csv").exists()


def test_simulate_audit_failure_and_force(tmp_path, capsys):
    d = _scalar_dict()
    d["attack"]["q"] = 0
    path = _write(tmp_path, "bad.json", d)
    assert main(["simulate", path, "--out-dir", str(tmp_path)]) == 1
    assert "audit failed" in capsys.readouterr().err

    assert main(["simulate", path, "--force", "--out-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "assumption-violating run" in out
    side = json.loads((tmp_path / "bad_log.json").read_text())
    assert side["assumption_violating"] is True


def test_simulate_blowup_exit_code(tmp_path, capsys):
    d = _scalar_dict()
    d["plant"]["A"] = [[1.0]]
    d["estimator"] = {"kappa": 1.0, "gamma": 2.0, "variant": "general"}
    d["attack"] = {"q": 0, "signals": [{"kind": "none"}] * 5}
    d["initial"] = {"x": {"kind": "explicit", "value": [1.0]}}
    d["sim"] = {"horizon": 40.0, "dt": 0.01}
    path = _write(tmp_path, "unstable.json", d)
    assert main(["simulate", path, "--out-dir", str(tmp_path)]) == 3
    assert "last stable t" in capsys.readouterr().err


def test_simulate_rejects_malformed_input(tmp_path, capsys):
    p = tmp_path / "garbage.json"
    p.write_text("{]")
    assert main(["simulate", str(p)]) == 2
    assert main(["simulate", "no_such_bundled_name"]) == 2


def test_bounds_general_vs_lyapunov(tmp_path, capsys):
    d = _scalar_dict()
    d["estimator"] = {"kappa": 0.5, "gamma": 2.0, "variant": "general"}
    path = _write(tmp_path, "gen.json", d)
    assert main(["bounds", path]) == 0
    out = capsys.readouterr().out
    assert "lambda_2 = 1.3819660" in out
    assert "median consensus tail radius = 1.6180340" in out
    assert "not applicable" in out

    assert main(["bounds", "scalar_lyapunov"]) == 0
    assert "estimation error tail radius = " in capsys.readouterr().out


def test_bounds_plug_and_play(capsys):
    assert main(["bounds", "scalar_lyapunov", "--nbar", "5",
                 "--sbar", "0.5"]) == 0
    out = capsys.readouterr().out
    assert "plug-and-play gamma = 134.164079" in out
    assert "kappa*gamma = 1" in out
    assert main(["bounds", "scalar_lyapunov", "--nbar", "5"]) == 2


def test_sweep_serial(tmp_path, capsys):
    path = _write(tmp_path, "sweepme.json", _scalar_dict())
    code = main(["sweep", path, "--param", "gamma", "--values", "1,4",
                 "--jobs", "1", "--out-dir", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "gamma = 1: ok" in out
    assert "gamma = 4: ok" in out
    assert (tmp_path / "sweepme_gamma_1_log.csv").exists()
    assert (tmp_path / "sweepme_gamma_4_log.json").exists()


def test_sweep_parallel_and_failure_codes(tmp_path, capsys):
    d = _scalar_dict()
    d["plant"]["A"] = [[1.0]]
    d["estimator"] = {"kappa": 1.0, "gamma": 2.0, "variant": "general"}
    d["attack"] = {"q": 0, "signals": [{"kind": "none"}] * 5}
    d["initial"] = {"x": {"kind": "explicit", "value": [1.0]}}
    path = _write(tmp_path, "mix.json", d)
    # horizon 5 stays finite, horizon 40 blows up on an unstable plant
    code = main(["sweep", path, "--param", "horizon", "--values", "5,40",
                 "--jobs", "2", "--out-dir", str(tmp_path)])
    assert code == 3
    out = capsys.readouterr().out
    assert "horizon = 5: ok" in out
    assert "horizon = 40: blowup" in out


def test_sweep_rejects_unknown_param(tmp_path, capsys):
    path = _write(tmp_path, "s.json", _scalar_dict())
    assert main(["sweep", path, "--param", "plant", "--values", "1"]) == 2
    assert main(["sweep", path, "--param", "gamma", "--values", ""]) == 2


def test_console_script_entrypoint():
    proc = subprocess.run([sys.executable, "-m", "medest.cli", "bounds",
                           "scalar_lyapunov"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "lambda_2" in proc.stdout


def test_scenario_name_overrides_stem(tmp_path, capsys):
    d = _scalar_dict(name="tagged")
    path = _write(tmp_path, "whatever.json", d)
    assert main(["simulate", path, "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "tagged_log.csv").exists()
    assert not (tmp_path / "whatever_log.csv").exists()
