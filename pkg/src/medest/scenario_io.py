"""Scenario files (strict JSON schema), trajectory CSV logs, and metric
sidecars.

Scenario schema, all matrices as nested row-major lists:

    {
      "name": str?,
      "plant": {"A": [[..]], "B": [[..]], "C_blocks": [[[..]], ..]},
      "topology": {"preset": "ring"|"complete"|"path", "n": int}
                  | {"adjacency": [[..]]},
      "estimator": {"kappa": f, "gamma": f, "variant": "general"|"lyapunov",
                    "P": [[..]]?},
      "observer": {"pole_target": f}?,
      "attack": {"q": int, "signals": [signal, ..]},
      "input": signal?,
      "initial": {"x": ic?, "z": ic?, "xhat": ic?}?,
      "sim": {"horizon": f, "dt": f?, "record_every": int?,
              "window_fraction": f?, "seed": int?, "noise_std": f?},
      "events": [{"time": f, "action": "leave"|"join", "agent": int}, ..]?,
      "basis": [[..]]?,
      "rank_tol": f?,
      "audit_override": bool?
    }

    signal: {"kind": "none"} | {"kind": "constant_bias", "value": f,
            "t_start": f?} | {"kind": "sinusoid", "amp": f, "freq": f,
            "t_start": f?} | {"kind": "ramp", "slope": f, "t_start": f?}
            | {"kind": "table", "times": [..], "values": [..]}
    ic:     {"kind": "zeros"|"truth"} | {"kind": "explicit", "value": [..]}
            | {"kind": "box", "low": f, "high": f}

Unknown keys anywhere are rejected with the offending path. Parsing then
re-serializing then parsing again yields an identical Scenario value.
"""

import json
from importlib import resources

import numpy as np

from . import graph as graphmod
from . import observability as obs
from .errors import ScenarioFormatError
from .sim import (AttackProfile, InitialCondition, Scenario, Signal,
                  applicable_bounds, tail_metrics)

_SIGNAL_KEYS = {
    "none": set(), "zero": set(),
    "constant_bias": {"value", "t_start"},
    "sinusoid": {"amp", "freq", "t_start"},
    "ramp": {"slope", "t_start"},
    "table": {"times", "values"},
}
_IC_KEYS = {"zeros": set(), "truth": set(), "explicit": {"value"},
            "box": {"low", "high"}}


def _fail(path, msg):
    raise ScenarioFormatError(f"{path}: {msg}")


def _expect(d, path, required, optional=()):
    if not isinstance(d, dict):
        _fail(path, f"expected an object, got {type(d).__name__}")
    unknown = set(d) - set(required) - set(optional)
    if unknown:
        _fail(path, f"unknown key(s) {sorted(unknown)}")
    missing = set(required) - set(d)
    if missing:
        _fail(path, f"missing key(s) {sorted(missing)}")


def _matrix(v, path):
    try:
        arr = np.asarray(v, dtype=np.float64)
    except (TypeError, ValueError):
        _fail(path, "not a numeric matrix")
    if arr.ndim != 2:
        _fail(path, f"expected a 2-D matrix, got shape {arr.shape}")
    return arr


def _signal(d, path):
    if not isinstance(d, dict) or "kind" not in d:
        _fail(path, "signal needs a 'kind'")
    kind = d["kind"]
    if kind not in _SIGNAL_KEYS:
        _fail(path, f"unknown signal kind {kind!r}")
    _expect(d, path, ["kind"], _SIGNAL_KEYS[kind])
    try:
        if kind in ("none", "zero"):
            return Signal(kind)
        if kind == "constant_bias":
            return Signal(kind, value=float(d["value"]),
                          t_start=float(d.get("t_start", 0.0)))
        if kind == "sinusoid":
            return Signal(kind, amp=float(d["amp"]), freq=float(d["freq"]),
                          t_start=float(d.get("t_start", 0.0)))
        if kind == "ramp":
            return Signal(kind, slope=float(d["slope"]),
                          t_start=float(d.get("t_start", 0.0)))
        return Signal(kind, times=tuple(d["times"]), values=tuple(d["values"]))
    except (TypeError, ValueError, KeyError) as exc:
        _fail(path, f"bad signal: {exc}")


def _ic(d, path):
    if not isinstance(d, dict) or "kind" not in d:
        _fail(path, "initial condition needs a 'kind'")
    kind = d["kind"]
    if kind not in _IC_KEYS:
        _fail(path, f"unknown initial-condition kind {kind!r}")
    _expect(d, path, ["kind"], _IC_KEYS[kind])
    try:
        if kind == "explicit":
            return InitialCondition(kind, value=tuple(
                np.asarray(d["value"], dtype=np.float64).ravel()))
        if kind == "box":
            return InitialCondition(kind, low=float(d["low"]),
                                    high=float(d["high"]))
        return InitialCondition(kind)
    except (TypeError, ValueError) as exc:
        _fail(path, f"bad initial condition: {exc}")


def scenario_from_dict(d, path="scenario"):
    _expect(d, path,
            ["plant", "topology", "estimator", "attack", "sim"],
            ["name", "observer", "input", "initial", "events", "basis",
             "rank_tol", "audit_override"])

    pd = d["plant"]
    _expect(pd, f"{path}.plant", ["A", "C_blocks"], ["B"])
    A = _matrix(pd["A"], f"{path}.plant.A")
    B = _matrix(pd["B"], f"{path}.plant.B") if "B" in pd else \
        np.zeros((A.shape[0], 1))
    if not isinstance(pd["C_blocks"], list) or not pd["C_blocks"]:
        _fail(f"{path}.plant.C_blocks", "need a nonempty list of matrices")
    C_blocks = tuple(_matrix(c, f"{path}.plant.C_blocks[{i}]")
                     for i, c in enumerate(pd["C_blocks"]))
    try:
        plant = obs.PlantModel(A, B, C_blocks)
    except ValueError as exc:
        _fail(f"{path}.plant", str(exc))

    td = d["topology"]
    if not isinstance(td, dict):
        _fail(f"{path}.topology", "expected an object")
    if "preset" in td:
        _expect(td, f"{path}.topology", ["preset", "n"])
        makers = {"ring": graphmod.Topology.ring,
                  "complete": graphmod.Topology.complete,
                  "path": graphmod.Topology.path}
        if td["preset"] not in makers:
            _fail(f"{path}.topology.preset", f"unknown preset {td['preset']!r}")
        topology = makers[td["preset"]](int(td["n"]))
    else:
        _expect(td, f"{path}.topology", ["adjacency"])
        try:
            topology = graphmod.Topology(_matrix(td["adjacency"],
                                                 f"{path}.topology.adjacency"))
        except ValueError as exc:
            _fail(f"{path}.topology.adjacency", str(exc))

    ed = d["estimator"]
    _expect(ed, f"{path}.estimator", ["kappa", "gamma"], ["variant", "P"])
    variant = ed.get("variant", "general")
    if variant not in ("general", "lyapunov"):
        _fail(f"{path}.estimator.variant", f"unknown variant {variant!r}")
    P = None
    if "P" in ed and ed["P"] is not None:
        P = tuple(tuple(float(v) for v in row)
                  for row in _matrix(ed["P"], f"{path}.estimator.P"))

    pole_target = -1.0
    if "observer" in d:
        _expect(d["observer"], f"{path}.observer", ["pole_target"])
        pole_target = float(d["observer"]["pole_target"])

    ad = d["attack"]
    _expect(ad, f"{path}.attack", ["q", "signals"])
    if not isinstance(ad["signals"], list) or len(ad["signals"]) != plant.N:
        _fail(f"{path}.attack.signals",
              f"need exactly {plant.N} signals (one per bank)")
    signals = tuple(_signal(s, f"{path}.attack.signals[{i}]")
                    for i, s in enumerate(ad["signals"]))
    attack = AttackProfile(signals, int(ad["q"]))

    u = _signal(d["input"], f"{path}.input") if "input" in d else Signal("zero")

    ics = {"x": InitialCondition("zeros"), "z": InitialCondition("zeros"),
           "xhat": InitialCondition("zeros")}
    if "initial" in d:
        _expect(d["initial"], f"{path}.initial", [], ["x", "z", "xhat"])
        for key in ics:
            if key in d["initial"]:
                ics[key] = _ic(d["initial"][key], f"{path}.initial.{key}")
    if ics["x"].kind == "truth" or ics["xhat"].kind == "truth":
        _fail(f"{path}.initial", "'truth' initialization applies to z only")

    sd = d["sim"]
    _expect(sd, f"{path}.sim", ["horizon"],
            ["dt", "record_every", "window_fraction", "seed", "noise_std"])

    events = ()
    if "events" in d:
        if not isinstance(d["events"], list):
            _fail(f"{path}.events", "expected a list")
        evs = []
        for i, e in enumerate(d["events"]):
            _expect(e, f"{path}.events[{i}]", ["time", "action", "agent"])
            evs.append((float(e["time"]), str(e["action"]), int(e["agent"])))
        events = tuple(evs)

    basis_V = None
    if "basis" in d and d["basis"] is not None:
        basis_V = _matrix(d["basis"], f"{path}.basis")

    try:
        return Scenario(
            plant=plant, topology=topology, horizon=float(sd["horizon"]),
            attack=attack, kappa=float(ed["kappa"]), gamma=float(ed["gamma"]),
            variant=variant, P=P, pole_target=pole_target, u=u,
            x0=ics["x"], z0=ics["z"], xhat0=ics["xhat"],
            dt=float(sd.get("dt", 1e-3)),
            record_every=int(sd.get("record_every", 1)),
            events=events,
            window_fraction=float(sd.get("window_fraction", 0.2)),
            rank_tol=float(d.get("rank_tol", obs.RANK_TOL)),
            audit_override=bool(d.get("audit_override", False)),
            noise_std=float(sd.get("noise_std", 0.0)),
            seed=int(sd.get("seed", 0)),
            basis_V=basis_V, name=str(d.get("name", "")))
    except ValueError as exc:
        _fail(path, str(exc))


def _rows(M):
    return [[float(v) for v in row] for row in np.asarray(M)]


def _signal_dict(s):
    out = {"kind": s.kind}
    if s.kind == "constant_bias":
        out.update(value=s.value, t_start=s.t_start)
    elif s.kind == "sinusoid":
        out.update(amp=s.amp, freq=s.freq, t_start=s.t_start)
    elif s.kind == "ramp":
        out.update(slope=s.slope, t_start=s.t_start)
    elif s.kind == "table":
        out.update(times=list(s.times), values=list(s.values))
    return out


def _ic_dict(ic):
    out = {"kind": ic.kind}
    if ic.kind == "explicit":
        out["value"] = [float(v) for v in ic.value]
    elif ic.kind == "box":
        out.update(low=ic.low, high=ic.high)
    return out


def scenario_to_dict(s):
    d = {
        "plant": {"A": _rows(s.plant.A), "B": _rows(s.plant.B),
                  "C_blocks": [_rows(c) for c in s.plant.C_blocks]},
        "topology": {"adjacency": _rows(s.topology.adjacency)},
        "estimator": {"kappa": s.kappa, "gamma": s.gamma, "variant": s.variant},
        "observer": {"pole_target": s.pole_target},
        "attack": {"q": s.attack.q,
                   "signals": [_signal_dict(sig) for sig in s.attack.signals]},
        "input": _signal_dict(s.u),
        "initial": {"x": _ic_dict(s.x0), "z": _ic_dict(s.z0),
                    "xhat": _ic_dict(s.xhat0)},
        "sim": {"horizon": s.horizon, "dt": s.dt,
                "record_every": s.record_every,
                "window_fraction": s.window_fraction, "seed": s.seed,
                "noise_std": s.noise_std},
        "rank_tol": s.rank_tol,
        "audit_override": s.audit_override,
    }
    if s.name:
        d["name"] = s.name
    if s.P is not None:
        d["estimator"]["P"] = [list(row) for row in s.P]
    if s.events:
        d["events"] = [{"time": t, "action": a, "agent": g}
                       for (t, a, g) in s.events]
    if s.basis_V is not None:
        d["basis"] = _rows(s.basis_V)
    return d


def load_scenario(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"{path}: invalid JSON ({exc})") from exc
    except OSError as exc:
        raise ScenarioFormatError(f"{path}: {exc}") from exc
    return scenario_from_dict(raw, path=str(path))


def save_scenario(scenario, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=2)
        fh.write("\n")


def bundled_scenario_path(name):
    """Filesystem path of a packaged scenario ('threeinertia' or
    'threeinertia.json' both work)."""
    fname = name if name.endswith(".json") else name + ".json"
    root = resources.files("medest") / "scenarios" / fname
    if not root.is_file():
        raise ScenarioFormatError(f"no bundled scenario named {name!r}")
    return str(root)


def list_bundled():
    root = resources.files("medest") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def resolve_scenario(path_or_name):
    """A real file path wins; otherwise fall back to the bundled set."""
    import os
    if os.path.exists(path_or_name):
        return str(path_or_name)
    return bundled_scenario_path(str(path_or_name))


def csv_column_names(log):
    names = ["t"]
    names += [f"x{c}" for c in range(1, log.scenario.plant.n + 1)]
    for i, bank in enumerate(log.banks, start=1):
        names += [f"xhat{i}_{c}" for c in range(1, log.scenario.plant.n + 1)]
        names += [f"z{i}_{k}" for k in range(1, bank.o_i + 1)]
        names.append(f"residual{i}")
    names += [f"xbar_avg_{c}" for c in range(1, log.scenario.plant.n + 1)]
    names += ["W", "V"]
    return names


def write_log_csv(log, path):
    """CSV: t, x, then per agent xhat_i | z_i | residual_i, then xbar_avg,
    W, V. Full float64 round-trip precision."""
    cols = [log.t[:, None], log.x]
    for i in range(len(log.banks)):
        cols.append(log.xhat[:, i, :])
        cols.append(log.z_block(i))
        cols.append(log.residuals[:, i:i + 1])
    cols += [log.xbar_avg, log.W[:, None], log.V[:, None]]
    data = np.column_stack(cols)
    np.savetxt(path, data, fmt="%.17g", delimiter=",",
               header=",".join(csv_column_names(log)), comments="")


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


def sidecar_dict(log):
    basis = log.basis
    audits = []
    for rep in log.audits:
        audits.append({
            "time": rep.time,
            "all_pass": rep.all_pass,
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail}
                       for c in rep.checks],
            "indicator_column_counts": list(rep.column_counts),
            "required_count": rep.required_count,
        })
    return _jsonable({
        "scenario": scenario_to_dict(log.scenario),
        "seed": log.scenario.seed,
        "backend": log.backend,
        "bounds": applicable_bounds(log),
        "tail": tail_metrics(log),
        "basis": {
            "V": _rows(basis.V), "W": _rows(basis.W),
            "indicators": _rows(basis.indicators),
            "observable_columns": [
                [int(l) + 1 for l in basis.observable_columns(i)]
                for i in range(log.scenario.plant.N)],
        },
        # per-bank observability decompositions so downstream consumers can
        # rebuild state estimates from the z columns alone
        "banks": [{"o_i": b.o_i, "V_i": _rows(b.V_i), "W_i": _rows(b.W_i)}
                  for b in log.banks],
        "csv_columns": csv_column_names(log),
        "audits": audits,
        "assumption_violating": not all(r.all_pass for r in log.audits),
    })


def write_sidecar(log, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(sidecar_dict(log), fh, indent=2)
        fh.write("\n")
