"""Command-line front end.

Subcommands: audit (assumption report), median (distributed median demo),
simulate (full run with CSV + JSON sidecar), bounds (guaranteed radii and
plug-and-play gains), sweep (parallel parameter sweep).

Exit codes: 0 success, 1 assumption/audit failure, 2 input error,
3 numerical failure.
"""

import argparse
import dataclasses
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import estimator as est
from . import graph as graphmod
from . import median as med
from . import scenario_io as sio
from . import sim as simmod
from .backend import BACKEND
from .errors import (AuditFailure, MedestError, NumericalBlowup,
                     ScenarioFormatError)

EXIT_OK = 0
EXIT_AUDIT = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3

_SWEEPABLE = ("kappa", "gamma", "dt", "noise_std", "horizon", "pole_target",
              "seed")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v != ""]
    except ValueError as exc:
        raise ScenarioFormatError(f"bad numeric list {text!r}: {exc}")


def _topology(preset, n):
    makers = {"ring": graphmod.Topology.ring,
              "complete": graphmod.Topology.complete,
              "path": graphmod.Topology.path}
    if preset not in makers:
        raise ScenarioFormatError(f"unknown topology preset {preset!r}")
    return makers[preset](n)


def _out_dir(args):
    d = args.out_dir or os.environ.get("MEDEST_OUT_DIR") or "."
    os.makedirs(d, exist_ok=True)
    return d


def _stem(scenario, path):
    if scenario.name:
        return scenario.name
    base = os.path.basename(str(path))
    return base[:-5] if base.endswith(".json") else base


def cmd_audit(args):
    scenario = sio.load_scenario(sio.resolve_scenario(args.scenario))
    report = simmod.audit_assumptions(scenario)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.all_pass else EXIT_AUDIT


def cmd_median(args):
    if args.z is None:
        if args.n is None:
            raise ScenarioFormatError("need --z values or --n for a "
                                      "bound-only report")
        topo = _topology(args.topology, args.n)
        lam2 = graphmod.algebraic_connectivity(graphmod.laplacian(topo))
        bound = med.median_consensus_error_bound(args.n, args.gamma, lam2)
        print(f"lambda_2 = {lam2:.7f}")
        print(f"median consensus tail radius = {bound:.5f}")
        return EXIT_OK
    z = np.asarray(_floats(args.z))
    s = (np.ones(z.size, dtype=int) if args.s is None
         else np.asarray([int(v) for v in args.s.split(",")]))
    topo = _topology(args.topology, z.size)
    problem = med.MedianProblem(z, s, topo, args.gamma)
    x0 = np.zeros(z.size) if args.x0 is None else np.asarray(_floats(args.x0))
    run = med.run_median_solver(problem, x0, horizon=args.horizon, dt=args.dt)
    print(f"target median set = [{run.target.lower:.6g}, {run.target.upper:.6g}]")
    print(f"guaranteed tail radius = {run.bound:.5f}")
    print(f"measured tail distance = {run.tail_max_dist:.5f} "
          f"({'PASS' if run.tail_max_dist <= run.bound else 'FAIL'})")
    if args.out:
        dist = run.target.distance(run.x).max(axis=1)
        data = np.column_stack([run.t, run.x, dist])
        names = ["t"] + [f"x{i}" for i in range(1, z.size + 1)] + \
                ["dist_to_median_set"]
        np.savetxt(args.out, data, fmt="%.17g", delimiter=",",
                   header=",".join(names), comments="")
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_simulate(args):
    path = sio.resolve_scenario(args.scenario)
    scenario = sio.load_scenario(path)
    if args.force:
        scenario = dataclasses.replace(scenario, audit_override=True)
    log = simmod.run_scenario(scenario)
    out = _out_dir(args)
    stem = _stem(scenario, path)
    csv_path = os.path.join(out, f"{stem}_log.csv")
    json_path = os.path.join(out, f"{stem}_log.json")
    sio.write_log_csv(log, csv_path)
    sio.write_sidecar(log, json_path)
    metrics = simmod.tail_metrics(log)
    bounds = simmod.applicable_bounds(log)
    print(f"backend: {log.backend}")
    lo, hi = metrics["window"]
    print(f"tail window [{lo:.6g}, {hi:.6g}]")
    print(f"max estimation error (euclid) = {metrics['max_error_euclid']:.6g}")
    print(f"sup W = {metrics['sup_W']:.6g}, sup V = {metrics['sup_V']:.6g}")
    if "estimation_error_bound" in bounds:
        b = bounds["estimation_error_bound"]
        ok = metrics["max_error_euclid"] <= b
        print(f"guaranteed estimation tail radius = {b:.6g} "
              f"({'PASS' if ok else 'FAIL'})")
    if not all(r.all_pass for r in log.audits):
        print("assumption-violating run (forced past a failed audit)")
    print(f"wrote {csv_path}")
    print(f"wrote {json_path}")
    return EXIT_OK


def cmd_bounds(args):
    scenario = sio.load_scenario(sio.resolve_scenario(args.scenario))
    N, n = scenario.plant.N, scenario.plant.n
    lam2 = graphmod.algebraic_connectivity(
        graphmod.laplacian(scenario.topology))
    print(f"lambda_2 = {lam2:.7f}")
    print(f"median consensus tail radius = "
          f"{med.median_consensus_error_bound(N, scenario.gamma, lam2):.7f}")
    print(f"disagreement tail radius = "
          f"{est.disagreement_bound(N, n, scenario.gamma, lam2):.7g}")
    if scenario.variant == "lyapunov":
        _, _, config = simmod.prepare(scenario)
        print(f"estimation error tail radius = "
              f"{est.estimation_error_bound(N, n, scenario.gamma, lam2, config.output_norm):.7g}")
    else:
        print("estimation error tail radius: not applicable "
              "(requires the lyapunov variant)")
    if args.nbar is not None and args.sbar is not None:
        basis, _, config = simmod.prepare(scenario)
        kappa, gamma = est.plug_and_play_gains(args.nbar, n, args.sbar,
                                               config.output_norm)
        print(f"plug-and-play gamma = {gamma:.6f}, kappa = {kappa:.6g}, "
              f"kappa*gamma = {kappa * gamma:g}")
    elif args.nbar is not None or args.sbar is not None:
        raise ScenarioFormatError("--nbar and --sbar go together")
    return EXIT_OK


def _sweep_run(payload):
    sdict, param, value, out, stem = payload
    scenario = sio.scenario_from_dict(sdict)
    value_cast = int(value) if param == "seed" else value
    scenario = dataclasses.replace(scenario, **{param: value_cast})
    try:
        log = simmod.run_scenario(scenario)
    except AuditFailure:
        return (value, "audit", "")
    except NumericalBlowup as exc:
        return (value, "blowup", f"last stable t = {exc.last_stable_time:g}")
    tag = f"{stem}_{param}_{value:g}"
    sio.write_log_csv(log, os.path.join(out, f"{tag}_log.csv"))
    sio.write_sidecar(log, os.path.join(out, f"{tag}_log.json"))
    m = simmod.tail_metrics(log)
    return (value, "ok", f"max err = {m['max_error_euclid']:.6g}, "
                         f"sup W = {m['sup_W']:.6g}")


def cmd_sweep(args):
    path = sio.resolve_scenario(args.scenario)
    scenario = sio.load_scenario(path)
    if args.param not in _SWEEPABLE:
        raise ScenarioFormatError(
            f"--param must be one of {', '.join(_SWEEPABLE)}")
    values = _floats(args.values)
    if not values:
        raise ScenarioFormatError("--values must list at least one number")
    out = _out_dir(args)
    stem = _stem(scenario, path)
    sdict = sio.scenario_to_dict(scenario)
    payloads = [(sdict, args.param, v, out, stem) for v in values]
    if args.jobs == 1:
        results = [_sweep_run(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_run, payloads))
    code = EXIT_OK
    for value, status, detail in results:
        print(f"{args.param} = {value:g}: {status}"
              + (f" ({detail})" if detail else ""))
        if status == "blowup":
            code = max(code, EXIT_NUMERIC)
        elif status == "audit":
            code = max(code, EXIT_AUDIT)
    return code


def build_parser():
    parser = argparse.ArgumentParser(
        prog="medest",
        description="Resilient distributed state estimation under sparse "
                    "sensor attacks: audits, median demos, simulations, "
                    "bounds, sweeps.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("audit", help="check the standing assumptions")
    p.add_argument("scenario", help="scenario file or bundled name")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("median", help="run the distributed median solver")
    p.add_argument("--z", help="comma-separated indicated values")
    p.add_argument("--s", help="comma-separated 0/1 indicators (default all 1)")
    p.add_argument("--n", type=int, help="agent count for bound-only output")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--topology", default="ring",
                   choices=("ring", "complete", "path"))
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--x0", help="comma-separated initial states (default 0)")
    p.add_argument("--out", help="write t, x_1..x_N, dist_to_median_set CSV")
    p.set_defaults(func=cmd_median)

    p = sub.add_parser("simulate", help="run a scenario, write CSV + sidecar")
    p.add_argument("scenario", help="scenario file or bundled name")
    p.add_argument("--out-dir", default=None,
                   help="output directory (default $MEDEST_OUT_DIR or '.')")
    p.add_argument("--force", action="store_true",
                   help="run even if an audit fails; output is marked")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bounds", help="print guaranteed radii and gains")
    p.add_argument("scenario", help="scenario file or bundled name")
    p.add_argument("--nbar", type=int, default=None,
                   help="design-time max agent count for plug-and-play gains")
    p.add_argument("--sbar", type=float, default=None,
                   help="target tail radius for plug-and-play gains")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("sweep", help="parallel parameter sweep")
    p.add_argument("scenario", help="scenario file or bundled name")
    p.add_argument("--param", required=True,
                   help=f"one of {', '.join(_SWEEPABLE)}")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AuditFailure as exc:
        print("audit failed:", file=sys.stderr)
        for line in exc.report.lines():
            print(f"  {line}", file=sys.stderr)
        return EXIT_AUDIT
    except NumericalBlowup as exc:
        print(f"numerical blowup; last stable t = "
              f"{exc.last_stable_time:g}", file=sys.stderr)
        return EXIT_NUMERIC
    except ScenarioFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (MedestError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
