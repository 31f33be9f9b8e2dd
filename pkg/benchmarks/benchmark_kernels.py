"""Timing comparison of the compiled and pure-Python integration kernels.

Runs the median flow and the full observer network at a few sizes and
prints steps/second per backend plus the speedup. Usage:

    python3 benchmarks/benchmark_kernels.py [--steps 50000] [--repeats 1]

Both backends run the same step counts, so the pure-Python side dominates
the wall time; raise --steps/--repeats for sharper numbers.
"""

import argparse
import time

import numpy as np

from medest.backend import NetworkData, get_kernels
from medest.estimator import make_estimator_config
from medest.graph import Topology
from medest.observability import (PlantModel, build_observer_banks,
                                  construct_shared_basis)
from medest.sim import _csr_active


def _median_case(N, steps):
    rng = np.random.default_rng(0)
    topo = Topology.ring(N)
    indptr, indices = _csr_active(topo, np.ones(N, dtype=bool))
    values = rng.uniform(-3.0, 3.0, N)
    s = np.ones(N)
    x0 = rng.uniform(-3.0, 3.0, N)
    log = np.empty((2, N))

    def run(kmod):
        x = x0.copy()
        log[0] = x
        ret = kmod.run_median(x, values, s, 2.0, indptr, indices, 1e-3,
                              steps, steps, 0, log)
        assert ret == -1

    return run


def _network_case(n, N, steps):
    rng = np.random.default_rng(1)
    A = np.zeros((n, n))
    A[range(n - 1), range(1, n)] = 1.0  # chain of integrators
    C = [np.eye(n)[:1] for _ in range(N)]
    plant = PlantModel(A, None, C)
    basis = construct_shared_basis(plant)
    banks = build_observer_banks(plant, basis)
    config = make_estimator_config(basis, 1.0, 2.0)
    topo = Topology.ring(N)
    indptr, indices = _csr_active(topo, np.ones(N, dtype=bool))
    data = NetworkData.build(plant, banks, config.Wbar, config.Mout,
                             basis.indicators, 1.0, 2.0, indptr, indices,
                             np.ones(N, dtype=np.uint8))
    o_total = sum(b.o_i for b in banks)
    m_total = sum(plant.m_sizes)
    x0 = rng.normal(size=n) * 0.1
    z0 = np.concatenate([b.W_i @ x0 for b in banks])
    xhat0 = rng.normal(size=(N, n))
    zero_u = np.zeros((1, plant.p))
    zero_a = np.zeros((1, m_total))
    zero_w = np.zeros((1, m_total))
    log_x = np.empty((2, n))
    log_z = np.empty((2, o_total))
    log_h = np.empty((2, N, n))

    def run(kmod):
        x, z, xhat = x0.copy(), z0.copy(), xhat0.copy()
        log_x[0], log_z[0], log_h[0] = x, z, xhat
        ret = kmod.run_network(data, x, z, xhat, zero_u, 0, zero_a, 0,
                               zero_w, 0, 1e-4, steps, steps, 0,
                               log_x, log_z, log_h)
        assert ret == -1

    return run


def _time(run, kmod, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        run(kmod)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=50_000)
    ap.add_argument("--repeats", type=int, default=1)
    args = ap.parse_args(argv)

    try:
        cy = get_kernels("cython")
    except Exception as exc:
        raise SystemExit(f"compiled backend unavailable: {exc}")
    py = get_kernels("python")

    cases = [
        ("median N=5", _median_case(5, args.steps), args.steps),
        ("median N=20", _median_case(20, args.steps), args.steps),
        ("network n=2 N=5", _network_case(2, 5, args.steps), args.steps),
        ("network n=6 N=5", _network_case(6, 5, args.steps // 2),
         args.steps // 2),
        ("network n=4 N=12", _network_case(4, 12, args.steps // 2),
         args.steps // 2),
    ]

    print(f"{'case':<18}{'steps':>9}{'python s':>11}{'cython s':>11}"
          f"{'py Msteps/s':>13}{'cy Msteps/s':>13}{'speedup':>9}")
    for name, run, steps in cases:
        t_py = _time(run, py, args.repeats)
        t_cy = _time(run, cy, args.repeats)
        print(f"{name:<18}{steps:>9}{t_py:>11.3f}{t_cy:>11.3f}"
              f"{steps / t_py / 1e6:>13.2f}{steps / t_cy / 1e6:>13.2f}"
              f"{t_py / t_cy:>9.1f}x")


if __name__ == "__main__":
    main()
