"""Scenario JSON schema, CSV logs, and metric sidecars."""

import json

import numpy as np
import pytest

from medest.errors import ScenarioFormatError
from medest.scenario_io import (bundled_scenario_path, csv_column_names,
                                list_bundled, load_scenario, resolve_scenario,
                                save_scenario, scenario_from_dict,
                                scenario_to_dict, sidecar_dict, write_log_csv,
                                write_sidecar)
from medest.sim import run_scenario


def _minimal_dict(**over):
    d = {
        "plant": {"A": [[0.0]], "B": [[0.0]],
                  "C_blocks": [[[1.0]]] * 5},
        "topology": {"preset": "ring", "n": 5},
        "estimator": {"kappa": 1.0, "gamma": 2.0, "variant": "general"},
        "attack": {"q": 1, "signals": [{"kind": "none"}] * 5},
        "sim": {"horizon": 1.0, "dt": 0.01},
    }
    d.update(over)
    return d


def test_bundled_scenarios_all_load_and_roundtrip():
    names = list_bundled()
    assert {"threeinertia", "scalar_median", "scalar_lyapunov", "joinleave",
            "dual_oscillator", "repeated_pole_triple"} <= set(names)
    for name in names:
        sc = load_scenario(bundled_scenario_path(name))
        again = scenario_from_dict(scenario_to_dict(sc))
        assert again == sc, name


def test_save_load_roundtrip(tmp_path):
    sc = load_scenario(bundled_scenario_path("threeinertia"))
    p = tmp_path / "copy.json"
    save_scenario(sc, p)
    assert load_scenario(p) == sc


def test_resolve_prefers_real_files(tmp_path):
    p = tmp_path / "threeinertia"
    save_scenario(scenario_from_dict(_minimal_dict()), p)
    assert resolve_scenario(str(p)) == str(p)
    assert resolve_scenario("threeinertia").endswith("threeinertia.json")
    with pytest.raises(ScenarioFormatError):
        resolve_scenario("no_such_scenario")


def test_minimal_dict_parses():
    sc = scenario_from_dict(_minimal_dict())
    assert sc.plant.N == 5
    assert sc.kappa == 1.0
    assert sc.dt == 0.01
    assert sc.attack.q == 1


def test_unknown_top_level_key_rejected():
    with pytest.raises(ScenarioFormatError, match="bogus"):
        scenario_from_dict(_minimal_dict(bogus=1))


def test_unknown_nested_key_has_path():
    d = _minimal_dict()
    d["attack"]["signals"][0] = {"kind": "sinusoid", "amp": 1.0, "freq": 1.0,
                                 "phase": 0.5}
    with pytest.raises(ScenarioFormatError) as exc:
        scenario_from_dict(d)
    assert "phase" in str(exc.value)
    assert "signals" in str(exc.value)


def test_missing_required_key_rejected():
    d = _minimal_dict()
    del d["sim"]
    with pytest.raises(ScenarioFormatError, match="sim"):
        scenario_from_dict(d)
    d2 = _minimal_dict()
    del d2["plant"]["A"]
    with pytest.raises(ScenarioFormatError, match="A"):
        scenario_from_dict(d2)


def test_bad_signal_kind_rejected():
    d = _minimal_dict()
    d["attack"]["signals"][2] = {"kind": "sawtooth"}
    with pytest.raises(ScenarioFormatError, match="sawtooth"):
        scenario_from_dict(d)


def test_bad_matrix_rejected():
    d = _minimal_dict()
    d["plant"]["A"] = [[1.0], [2.0, 3.0]]
    with pytest.raises(ScenarioFormatError):
        scenario_from_dict(d)


def test_invalid_json_file(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    with pytest.raises(ScenarioFormatError, match="invalid JSON"):
        load_scenario(p)
    with pytest.raises(ScenarioFormatError):
        load_scenario(tmp_path / "absent.json")


def test_serialization_emits_only_nondefault_blocks():
    d = scenario_to_dict(scenario_from_dict(_minimal_dict()))
    for key in ("events", "basis", "name"):
        assert key not in d
    assert "P" not in d["estimator"]
    sc = load_scenario(bundled_scenario_path("joinleave"))
    d2 = scenario_to_dict(sc)
    assert "events" in d2
    assert d2["estimator"]["variant"] == "lyapunov"


def test_csv_log_roundtrip(tmp_path):
    sc = load_scenario(bundled_scenario_path("scalar_lyapunov"))
    log = run_scenario(sc)
    names = csv_column_names(log)
    assert names[0] == "t"
    assert names[1] == "x1"
    assert names[-2:] == ["W", "V"]
    assert "xhat3_1" in names and "residual5" in names

    p = tmp_path / "run.csv"
    write_log_csv(log, p)
    header = p.read_text().splitlines()[0]
    assert header.split(",") == names

    data = np.genfromtxt(p, delimiter=",", names=True)
    assert np.array_equal(data["t"], log.t)
    assert np.array_equal(data["x1"], log.x[:, 0])
    assert np.array_equal(data["xhat2_1"], log.xhat[:, 1, 0])
    assert np.array_equal(data["z4_1"], log.z_block(3)[:, 0])
    assert np.array_equal(data["residual1"], log.residuals[:, 0])
    assert np.array_equal(data["W"], log.W)
    assert np.array_equal(data["V"], log.V)


def test_sidecar_contents(tmp_path):
    sc = load_scenario(bundled_scenario_path("scalar_lyapunov"))
    log = run_scenario(sc)
    side = sidecar_dict(log)

    assert scenario_from_dict(side["scenario"]) == sc
    assert side["backend"] in ("python", "cython")
    assert side["seed"] == sc.seed
    assert side["csv_columns"] == csv_column_names(log)
    assert side["assumption_violating"] is False
    assert side["audits"][0]["all_pass"] is True
    assert "estimation_error_bound" in side["bounds"]
    assert side["tail"]["max_error_euclid"] <= side["bounds"]["estimation_error_bound"]
    V = np.asarray(side["basis"]["V"])
    W = np.asarray(side["basis"]["W"])
    assert np.allclose(W @ V, np.eye(V.shape[0]), atol=1e-9)
    assert side["basis"]["observable_columns"] == [[1]] * 5
    for blk, bank in zip(side["banks"], log.banks):
        assert blk["o_i"] == bank.o_i
        Vi = np.asarray(blk["V_i"], dtype=np.float64).reshape(V.shape[0],
                                                              blk["o_i"])
        Wi = np.asarray(blk["W_i"], dtype=np.float64).reshape(blk["o_i"],
                                                              V.shape[0])
        assert np.allclose(Wi @ Vi, np.eye(blk["o_i"]), atol=1e-9)

    p = tmp_path / "side.json"
    write_sidecar(log, p)
    assert json.loads(p.read_text()) == side


def test_sidecar_marks_forced_runs():
    import dataclasses
    sc = load_scenario(bundled_scenario_path("scalar_median"))
    sc = dataclasses.replace(
        sc, attack=dataclasses.replace(sc.attack, q=0), audit_override=True)
    log = run_scenario(sc)
    side = sidecar_dict(log)
    assert side["assumption_violating"] is True
    assert side["audits"][0]["all_pass"] is False
