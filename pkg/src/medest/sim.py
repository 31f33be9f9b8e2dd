"""Scenario-driven co-simulation of plant, partial observers, and the
resilient estimator network, with attack generators, join/leave events,
assumption audits, and proof-coordinate diagnostics.

One run is single-threaded and deterministic: fixed-step RK4 on a shared
grid, exogenous signals sampled on the half grid, piecewise-constant seeded
noise, and all randomness drawn from one generator seeded in the scenario.
"""

import math
from dataclasses import dataclass, field, replace  # noqa: F401 (replace is part of the API)

import numpy as np

from . import estimator as est
from . import graph as graphmod
from . import observability as obs
from .backend import BACKEND, NetworkData, kernels
from .errors import (AuditFailure, BasisMismatch, CombinatorialLimit,
                     NoSharedBasisFound, NumericalBlowup, SingularBasis)

CHUNK_STEPS = 200_000
SIGNAL_KINDS = ("none", "zero", "constant_bias", "sinusoid", "ramp", "table")


@dataclass(frozen=True)
class Signal:
    """Scalar signal preset; 'none'/'zero' are synonyms.

    constant_bias: value for t >= t_start, else 0
    sinusoid:      amp * sin(freq * t) for t >= t_start, else 0
    ramp:          slope * (t - t_start) for t >= t_start, else 0
    table:         zero-order hold of values at times (0 before the first)
    """

    kind: str = "zero"
    value: float = 0.0
    amp: float = 0.0
    freq: float = 0.0
    slope: float = 0.0
    t_start: float = 0.0
    times: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise ValueError(f"unknown signal kind {self.kind!r}")
        if self.kind == "table":
            if len(self.times) != len(self.values) or not self.times:
                raise ValueError("table signal needs matching nonempty "
                                 "times/values")
            if any(b <= a for a, b in zip(self.times, self.times[1:])):
                raise ValueError("table times must be strictly increasing")
            object.__setattr__(self, "times", tuple(float(v) for v in self.times))
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @property
    def is_zero(self):
        return self.kind in ("none", "zero")

    def sample(self, t):
        """Evaluate at scalar or array t."""
        t = np.asarray(t, dtype=np.float64)
        if self.kind in ("none", "zero"):
            return np.zeros_like(t)
        if self.kind == "constant_bias":
            return np.where(t >= self.t_start, self.value, 0.0)
        if self.kind == "sinusoid":
            return np.where(t >= self.t_start, self.amp * np.sin(self.freq * t), 0.0)
        if self.kind == "ramp":
            return np.where(t >= self.t_start, self.slope * (t - self.t_start), 0.0)
        times = np.asarray(self.times)
        vals = np.asarray(self.values)
        idx = np.searchsorted(times, t, side="right") - 1
        return np.where(idx >= 0, vals[np.maximum(idx, 0)], 0.0)


@dataclass(frozen=True)
class AttackProfile:
    """One signal per bank (broadcast across the bank's rows) plus the
    declared sparsity budget q."""

    signals: tuple
    q: int

    def __post_init__(self):
        object.__setattr__(self, "signals", tuple(self.signals))
        if self.q < 0:
            raise ValueError("q must be nonnegative")

    def attacked_banks(self):
        """0-based indices of banks with a non-null signal."""
        return tuple(i for i, s in enumerate(self.signals) if not s.is_zero)


def attack_signal(scenario, i, t):
    """Attack vector for bank i (0-based) at time t."""
    val = scenario.attack.signals[i].sample(t)
    return np.full(scenario.plant.m_sizes[i], float(val))


@dataclass(frozen=True)
class InitialCondition:
    """zeros | explicit(value) | box(low, high, seeded) | truth (z only:
    project the drawn plant state through each agent's W_i)."""

    kind: str = "zeros"
    value: tuple = ()
    low: float = 0.0
    high: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zeros", "explicit", "box", "truth"):
            raise ValueError(f"unknown initial-condition kind {self.kind!r}")
        if self.kind == "explicit":
            object.__setattr__(self, "value",
                               tuple(np.asarray(self.value, dtype=np.float64).ravel()))


def _draw_initial(ic, shape, rng, truth=None):
    size = int(np.prod(shape))
    if ic.kind == "zeros":
        return np.zeros(shape)
    if ic.kind == "explicit":
        v = np.asarray(ic.value, dtype=np.float64)
        if v.size != size:
            raise ValueError(f"explicit initial condition needs {size} entries, "
                             f"got {v.size}")
        return v.reshape(shape).copy()
    if ic.kind == "box":
        return rng.uniform(ic.low, ic.high, shape)
    if truth is None:
        raise ValueError("'truth' initialization applies to partial estimates only")
    return truth()


@dataclass(frozen=True, eq=False)
class Scenario:
    plant: obs.PlantModel
    topology: graphmod.Topology
    horizon: float
    attack: AttackProfile
    kappa: float = 0.5
    gamma: float = 2.0
    variant: str = "general"
    P: tuple = None
    pole_target: float = -1.0
    u: Signal = Signal("zero")
    x0: InitialCondition = InitialCondition("zeros")
    z0: InitialCondition = InitialCondition("zeros")
    xhat0: InitialCondition = InitialCondition("zeros")
    dt: float = 1e-3
    record_every: int = 1
    events: tuple = ()
    window_fraction: float = 0.2
    rank_tol: float = obs.RANK_TOL
    audit_override: bool = False
    noise_std: float = 0.0
    seed: int = 0
    basis_V: np.ndarray = None
    name: str = ""

    def __post_init__(self):
        if self.dt <= 0 or self.horizon <= 0:
            raise ValueError("dt and horizon must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if not 0 < self.window_fraction <= 1:
            raise ValueError("window_fraction must be in (0, 1]")
        if len(self.attack.signals) != self.plant.N:
            raise ValueError("need exactly one attack signal per bank")
        if self.topology.node_count != self.plant.N:
            raise ValueError("topology size must match the number of banks")
        times = [e[0] for e in self.events]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("event times must be strictly increasing")
        for e in self.events:
            if len(e) != 3 or e[1] not in ("leave", "join"):
                raise ValueError("events are (time, 'leave'|'join', agent)")
            if not 1 <= e[2] <= self.plant.N:
                raise ValueError(f"event agent {e[2]} out of range")

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        def eq(a, b):
            if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
                return a is not None and b is not None and np.array_equal(a, b)
            return a == b
        return (eq(self.plant.A, other.plant.A)
                and eq(self.plant.B, other.plant.B)
                and len(self.plant.C_blocks) == len(other.plant.C_blocks)
                and all(eq(a, b) for a, b in zip(self.plant.C_blocks,
                                                 other.plant.C_blocks))
                and eq(self.topology.adjacency, other.topology.adjacency)
                and (self.basis_V is None) == (other.basis_V is None)
                and (self.basis_V is None or eq(self.basis_V, other.basis_V))
                and all(getattr(self, f) == getattr(other, f) for f in
                        ("horizon", "attack", "kappa", "gamma", "variant", "P",
                         "pole_target", "u", "x0", "z0", "xhat0", "dt",
                         "record_every", "events", "window_fraction",
                         "rank_tol", "audit_override", "noise_std", "seed",
                         "name")))


@dataclass(frozen=True)
class AuditCheck:
    name: str
    passed: bool
    detail: str
    evidence: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AuditReport:
    checks: tuple
    column_counts: tuple
    required_count: int
    time: float = None

    @property
    def all_pass(self):
        return all(c.passed for c in self.checks)

    def lines(self):
        out = []
        for c in self.checks:
            out.append(f"{c.name}: {'PASS' if c.passed else 'FAIL'} ({c.detail})")
        if self.column_counts:
            out.append(f"indicator column counts {list(self.column_counts)} "
                       f"(required >= {self.required_count})")
        return out


def _basis_for(scenario):
    if scenario.basis_V is not None:
        return obs.check_shared_basis(scenario.plant, scenario.basis_V,
                                      scenario.rank_tol)
    return obs.construct_shared_basis(scenario.plant, scenario.rank_tol)


def audit_assumptions(scenario, active=None, time=None):
    """Pass/fail report for the four standing assumptions, with evidence.

    With an active mask the budget, redundancy, and connectivity checks apply
    to the induced subnetwork (join/leave re-audits).
    """
    plant = scenario.plant
    N = plant.N
    active = np.ones(N, dtype=bool) if active is None else np.asarray(active, bool)
    act_idx = [i for i in range(N) if active[i]]
    q = scenario.attack.q
    checks = []

    attacked = [i for i in scenario.attack.attacked_banks() if active[i]]
    checks.append(AuditCheck(
        "attack budget", len(attacked) <= q,
        f"{len(attacked)} attacked of {len(act_idx)} active banks, budget q={q}",
        {"attacked_banks": [i + 1 for i in attacked], "q": q}))

    if 2 * q >= len(act_idx):
        checks.append(AuditCheck(
            "redundant observability", False,
            f"need 2q < N: 2*{q} >= {len(act_idx)} active banks", {}))
    else:
        sub = obs.PlantModel(plant.A, plant.B,
                             tuple(plant.C_blocks[i] for i in act_idx))
        try:
            ok = obs.check_redundant_observability(sub, q, scenario.rank_tol)
            witness = None
            if not ok:
                w = obs.find_unobservable_subset(sub, q, scenario.rank_tol)
                witness = tuple(act_idx[k] + 1 for k in w) if w else None
            checks.append(AuditCheck(
                "redundant observability", ok,
                f"observable from every {len(act_idx) - 2 * q} of "
                f"{len(act_idx)} active banks" if ok else
                f"unobservable from banks {witness}",
                {"witness_banks": witness} if witness else {}))
        except CombinatorialLimit as exc:
            checks.append(AuditCheck("redundant observability", False,
                                     str(exc), {}))

    connected = graphmod.is_connected(scenario.topology, active)
    lam2 = None
    if len(act_idx) >= 2:
        sub_adj = scenario.topology.adjacency[np.ix_(act_idx, act_idx)]
        lam2 = graphmod.algebraic_connectivity(
            graphmod.laplacian(graphmod.Topology(sub_adj)))
    checks.append(AuditCheck(
        "network connectivity", connected,
        f"lambda_2 = {lam2:.6g}" if lam2 is not None else "single active node",
        {"lambda2": lam2}))

    column_counts = ()
    try:
        basis = _basis_for(scenario)
        column_counts = tuple(int(c) for c in
                              basis.indicators[active].sum(axis=0))
        checks.append(AuditCheck(
            "shared basis", True,
            "every unobservable subspace is spanned by basis columns",
            {"indicators": basis.indicators.tolist()}))
    except (BasisMismatch, NoSharedBasisFound, SingularBasis) as exc:
        checks.append(AuditCheck("shared basis", False, str(exc), {}))

    return AuditReport(tuple(checks), column_counts, 2 * q + 1, time)


@dataclass(frozen=True, eq=False)
class TrajectoryLog:
    scenario: Scenario
    t: np.ndarray
    x: np.ndarray            # (K, n)
    z: np.ndarray            # (K, o_total), agents concatenated
    xhat: np.ndarray         # (K, N, n)
    residuals: np.ndarray    # (K, N)
    xbar: np.ndarray         # (K, N, n), per-agent error in basis coordinates
    xbar_avg: np.ndarray     # (K, n)
    xtilde: np.ndarray       # (K, (N-1) n)
    W: np.ndarray            # (K,)
    V: np.ndarray            # (K,)
    basis: obs.SharedBasis
    banks: tuple
    config: est.EstimatorConfig
    audits: tuple
    lam2: float
    R: np.ndarray
    ob_off: np.ndarray
    backend: str

    def z_block(self, i):
        return self.z[:, self.ob_off[i]:self.ob_off[i + 1]]


def _event_schedule(scenario, total_steps):
    """Validated (step, action, agent0) list plus the per-segment masks."""
    N = scenario.plant.N
    seen = set()
    schedule = []
    active = np.ones(N, dtype=bool)
    for (t_ev, action, agent) in scenario.events:
        step = int(round(t_ev / scenario.dt))
        if not 0 < step < total_steps:
            raise ValueError(f"event at t={t_ev} falls outside the horizon grid")
        if step in seen:
            raise ValueError(f"two events snap to the same grid step {step}")
        seen.add(step)
        schedule.append((step, action, agent - 1))
    marks = [0] + [s for s, _, _ in schedule] + [total_steps]
    segments = []
    for k, (start, end) in enumerate(zip(marks[:-1], marks[1:])):
        if k > 0:
            step, action, a = schedule[k - 1]
            if action == "leave":
                if not active[a]:
                    raise ValueError(f"agent {a + 1} left twice")
                active[a] = False
            else:
                if active[a]:
                    raise ValueError(f"agent {a + 1} joined while active")
                active[a] = True
        segments.append((start, end, active.copy()))
    return segments


def _csr_active(topology, active):
    counts, idx = [], []
    for i in range(topology.node_count):
        nb = [j for j in topology.neighbors[i] if active[i] and active[j]]
        counts.append(len(nb))
        idx.extend(nb)
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return indptr, np.asarray(idx, dtype=np.int64)


def prepare(scenario):
    """Shared basis, observer banks, and estimator config for a scenario."""
    basis = _basis_for(scenario)
    banks = obs.build_observer_banks(scenario.plant, basis,
                                     scenario.pole_target,
                                     rtol=scenario.rank_tol)
    P = np.asarray(scenario.P, dtype=np.float64) if scenario.P is not None else None
    config = est.make_estimator_config(basis, scenario.kappa, scenario.gamma,
                                       scenario.variant, P=P,
                                       A=scenario.plant.A)
    return basis, banks, config


def run_scenario(scenario):
    """Integrate the full coupled system and return the TrajectoryLog.

    Raises AuditFailure when any audit (initial or at an event) fails and the
    scenario does not set audit_override; raises NumericalBlowup when a state
    norm passes 1e12.
    """
    plant = scenario.plant
    n, N = plant.n, plant.N
    audits = [audit_assumptions(scenario)]
    if not audits[0].all_pass and not scenario.audit_override:
        raise AuditFailure(audits[0])
    basis, banks, config = prepare(scenario)

    total_steps = int(round(scenario.horizon / scenario.dt))
    if total_steps < 1:
        raise ValueError("horizon shorter than one step")
    segments = _event_schedule(scenario, total_steps)

    rng = np.random.default_rng(scenario.seed)
    x = _draw_initial(scenario.x0, (n,), rng)
    ob_off = np.concatenate([[0], np.cumsum([b.o_i for b in banks])]).astype(np.int64)
    o_total = int(ob_off[-1])
    if scenario.z0.kind == "truth":
        z = np.empty(o_total)
        for i, b in enumerate(banks):
            z[ob_off[i]:ob_off[i + 1]] = b.W_i @ x
    else:
        z = _draw_initial(scenario.z0, (o_total,), rng)
    xhat = _draw_initial(scenario.xhat0, (N, n), rng)

    re = scenario.record_every
    K = total_steps // re + 1
    m_total = sum(plant.m_sizes)
    log_x = np.empty((K, n))
    log_z = np.empty((K, o_total))
    log_xhat = np.empty((K, N, n))
    log_x[0], log_z[0], log_xhat[0] = x, z, xhat

    u_varies = not scenario.u.is_zero
    a_varies = any(not s.is_zero for s in scenario.attack.signals)
    noise_varies = scenario.noise_std > 0.0
    zero_u = np.zeros((1, plant.p))
    zero_a = np.zeros((1, m_total))
    m_off = np.concatenate([[0], np.cumsum(plant.m_sizes)]).astype(np.int64)

    for (seg_start, seg_end, active) in segments:
        if seg_start > 0:
            audit = audit_assumptions(scenario, active,
                                      time=seg_start * scenario.dt)
            audits.append(audit)
            if not audit.all_pass and not scenario.audit_override:
                raise AuditFailure(audit)
        indptr, indices = _csr_active(scenario.topology, active)
        data = NetworkData.build(plant, banks, config.Wbar, config.Mout,
                                 basis.indicators.astype(np.float64),
                                 scenario.kappa, scenario.gamma,
                                 indptr, indices, active.astype(np.uint8))
        pos = seg_start
        while pos < seg_end:
            cs = min(CHUNK_STEPS, seg_end - pos)
            if u_varies:
                th = (pos * scenario.dt) + 0.5 * scenario.dt * np.arange(2 * cs + 1)
                u_half = np.ascontiguousarray(
                    np.repeat(scenario.u.sample(th)[:, None], plant.p, axis=1))
            else:
                u_half = zero_u
            if a_varies:
                th = (pos * scenario.dt) + 0.5 * scenario.dt * np.arange(2 * cs + 1)
                a_half = np.zeros((2 * cs + 1, m_total))
                for i, sig in enumerate(scenario.attack.signals):
                    if not sig.is_zero:
                        a_half[:, m_off[i]:m_off[i + 1]] = sig.sample(th)[:, None]
            else:
                a_half = zero_a
            if noise_varies:
                noise = rng.normal(0.0, scenario.noise_std, (cs, m_total))
            else:
                noise = zero_a
            ret = kernels.run_network(
                data, x, z, xhat, u_half, int(u_varies), a_half, int(a_varies),
                noise, int(noise_varies), scenario.dt, cs, re, pos,
                log_x, log_z, log_xhat)
            if ret != -1:
                raise NumericalBlowup((pos + ret - 1) * scenario.dt)
            pos += cs

    t = np.arange(K) * (re * scenario.dt)
    residuals = np.empty((K, N))
    for i, b in enumerate(banks):
        zi = log_z[:, ob_off[i]:ob_off[i + 1]]
        proj = log_xhat[:, i, :] @ b.W_i.T
        residuals[:, i] = np.linalg.norm(zi - proj, axis=1)

    err = log_xhat - log_x[:, None, :]
    xbar = np.einsum("ab,kib->kia", config.Wbar, err)
    xbar_avg = xbar.mean(axis=1)
    R = graphmod.orthonormal_complement(N)
    xtilde = np.einsum("im,kia->kma", R, xbar).reshape(K, (N - 1) * n)
    Wt = np.linalg.norm(xtilde, axis=1)
    Vt = np.linalg.norm(xbar_avg, axis=1)
    lam2 = graphmod.algebraic_connectivity(graphmod.laplacian(scenario.topology))

    return TrajectoryLog(scenario, t, log_x, log_z, log_xhat, residuals,
                         xbar, xbar_avg, xtilde, Wt, Vt, basis, tuple(banks),
                         config, tuple(audits), lam2, R, ob_off, BACKEND)


def tail_metrics(log, window_fraction=None):
    """Sup statistics over the final window of the log.

    Returns max ∞-norm and Euclidean estimation errors over agents, the sups
    of the disagreement norm W(t) and average-error norm V(t), and per-agent
    residual sups, with the window bounds.
    """
    wf = log.scenario.window_fraction if window_fraction is None else window_fraction
    t = log.t
    t_lo = t[-1] - wf * (t[-1] - t[0])
    m = t >= t_lo
    err = log.xhat[m] - log.x[m][:, None, :]
    return {
        "window": (float(t_lo), float(t[-1])),
        "max_error_inf": float(np.max(np.abs(err))) if err.size else 0.0,
        "max_error_euclid": float(np.max(np.linalg.norm(err, axis=2))) if err.size else 0.0,
        "sup_W": float(np.max(log.W[m])),
        "sup_V": float(np.max(log.V[m])),
        "residual_sup": [float(v) for v in log.residuals[m].max(axis=0)],
    }


def applicable_bounds(log):
    """The guaranteed tail radii that apply to this run, by semantic name."""
    N, n = log.scenario.plant.N, log.scenario.plant.n
    out = {"lambda2": log.lam2,
           "disagreement_bound": est.disagreement_bound(
               N, n, log.scenario.gamma, log.lam2)}
    if log.config.variant == "lyapunov":
        out["estimation_error_bound"] = est.estimation_error_bound(
            N, n, log.scenario.gamma, log.lam2, log.config.output_norm)
    return out


def reconstruction_residual(log):
    """Max over samples of || xbar_i - (xbar_avg + (r_i^T ⊗ I) xtilde) ||,
    the identity tying the proof coordinates together."""
    K, N, n = log.xbar.shape
    recon = log.xbar_avg[:, None, :] + np.einsum(
        "im,kma->kia", log.R, log.xtilde.reshape(K, N - 1, n))
    return float(np.max(np.abs(log.xbar - recon))) if log.xbar.size else 0.0
