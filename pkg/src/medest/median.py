"""Static distributed median solver.

A collection of N agents, each holding one scalar value z_i and an indicator
s_i in {0,1}, runs the signum-coupled flow

    dx_i/dt = s_i sgn(z_i - x_i) + gamma * sum_{j in N_i} (x_j - x_i)

over a connected undirected graph. Every agent state converges to a
neighborhood of the median set of the indicated values; the guaranteed tail
radius is 2 sqrt(N) / (gamma lambda_2).
"""

from dataclasses import dataclass

import numpy as np

from . import graph as graphmod
from .backend import get_kernels
from .errors import NoIndicatedValues, NumericalBlowup


def sgn(v):
    """Exact scalar signum with sgn(0) = 0; never returns -0.0."""
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0


@dataclass(frozen=True)
class MedianSet:
    """Closed interval [lower, upper]; degenerate when the count is odd."""

    lower: float
    upper: float

    def distance(self, v):
        """Pointwise distance of v (scalar or array) to the interval."""
        v = np.asarray(v, dtype=np.float64)
        return np.maximum(np.maximum(self.lower - v, v - self.upper), 0.0)

    def contains(self, v, tol=0.0):
        return bool(np.all(self.distance(v) <= tol))


@dataclass(frozen=True)
class MedianProblem:
    values: tuple
    indicators: tuple
    topology: graphmod.Topology
    gamma: float

    def __post_init__(self):
        if len(self.values) != len(self.indicators):
            raise ValueError("values and indicators must have equal length")
        if len(self.values) != self.topology.node_count:
            raise ValueError("problem size must match topology")
        if not all(s in (0, 1) for s in self.indicators):
            raise ValueError("indicators must be 0 or 1")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if sum(self.indicators) < 1:
            raise NoIndicatedValues("need at least one indicated value")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "indicators", tuple(int(s) for s in self.indicators))


def median_set(values, indicators):
    """Median set of the indicated values.

    Odd count: the single middle element (degenerate interval). Even count:
    the closed interval between the two middle elements.
    """
    z = [float(v) for v, s in zip(values, indicators) if s]
    if not z:
        raise NoIndicatedValues("all indicators are zero")
    z.sort()
    S = len(z)
    if S % 2 == 1:
        mid = z[S // 2]
        return MedianSet(mid, mid)
    return MedianSet(z[S // 2 - 1], z[S // 2])


def centralized_median_rhs(xhat, values, indicators):
    """Scalar gradient flow sum_i s_i sgn(z_i - xhat)."""
    acc = 0.0
    for v, s in zip(values, indicators):
        acc += s * sgn(v - xhat)
    return acc


def distributed_median_rhs(x, values, indicators, gamma, topology):
    """One evaluation of the distributed flow; reference implementation.

    The integration kernels reimplement this with identical arithmetic;
    this function is the readable single-point-of-truth used in tests.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        drive = indicators[i] * sgn(values[i] - x[i])
        acc = 0.0
        for j in topology.neighbors[i]:
            acc += x[j] - x[i]
        out[i] = drive + gamma * acc
    return out


def median_consensus_error_bound(n_agents, gamma, lam2):
    """Guaranteed tail radius 2 sqrt(N) / (gamma lambda_2) around the median set."""
    if n_agents < 1:
        raise ValueError("need at least one agent")
    if gamma <= 0 or lam2 <= 0:
        raise ValueError("gamma and lambda_2 must be positive")
    return 2.0 * np.sqrt(n_agents) / (gamma * lam2)


def default_horizon(problem, x0=None):
    """Transient budget before the tail window.

    Three pieces: consensus time constant, drive time, and a gamma-free
    reach term (the average state moves at speed >= 1/N while outside the
    value range, however large gamma is). Divided by 0.8 so the final 20%
    lies past the transient.
    """
    lam2 = graphmod.algebraic_connectivity(graphmod.laplacian(problem.topology))
    N = problem.topology.node_count
    lo, hi = min(problem.values), max(problem.values)
    if x0 is not None:
        lo = min(lo, float(np.min(x0)))
        hi = max(hi, float(np.max(x0)))
    return (10.0 / (problem.gamma * lam2) + 10.0 * N / problem.gamma
            + N * (hi - lo) + 1.0) / 0.8


@dataclass(frozen=True)
class MedianRun:
    problem: MedianProblem
    t: np.ndarray
    x: np.ndarray           # sample-major, one column per agent
    target: MedianSet
    bound: float
    tail_start: float
    tail_max_dist: float    # max_i sup over tail samples of dist(x_i, target)


def run_median_solver(problem, x0, horizon=None, dt=1e-3, record_every=1,
                      window_fraction=0.2, backend="active"):
    """Integrate the distributed flow and measure the tail distance.

    The tail statistic is the sup over the sampled points in the final
    window_fraction of the horizon (numerical surrogate for the limsup).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x0 = np.asarray(x0, dtype=np.float64)
    if horizon is None:
        horizon = default_horizon(problem, x0)
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    N = problem.topology.node_count
    if x0.shape != (N,):
        raise ValueError(f"x0 must have shape ({N},)")

    target = median_set(problem.values, problem.indicators)
    lam2 = graphmod.algebraic_connectivity(graphmod.laplacian(problem.topology))
    bound = median_consensus_error_bound(N, problem.gamma, lam2)

    steps = int(round(horizon / dt))
    K = steps // record_every + 1
    log_x = np.empty((K, N))
    log_x[0] = x0
    x = x0.copy()
    z = np.asarray(problem.values, dtype=np.float64)
    s = np.asarray(problem.indicators, dtype=np.float64)
    indptr = np.concatenate([[0], np.cumsum([len(nb) for nb in problem.topology.neighbors])]).astype(np.int64)
    indices = (np.concatenate(problem.topology.neighbors).astype(np.int64)
               if indptr[-1] else np.zeros(0, dtype=np.int64))
    ker = get_kernels(backend)
    ret = ker.run_median(x, z, s, problem.gamma, indptr, indices,
                         dt, steps, record_every, 0, log_x)
    if ret != -1:
        raise NumericalBlowup((ret - 1) * dt)

    t = np.arange(K) * (dt * record_every)
    tail_start = horizon * (1.0 - window_fraction)
    tail = t >= tail_start
    tail_max = float(np.max(target.distance(log_x[tail])))
    return MedianRun(problem, t, log_x, target, bound, tail_start, tail_max)
