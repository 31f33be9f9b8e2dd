"""Resilient estimator dynamics and the associated guarantees.

Every agent runs a copy of the plant model corrected along each shared-basis
direction by a signum of the disagreement between its own partial estimate
and its current state estimate, plus diffusive coupling with its neighbors:

    dxhat_i/dt = A xhat_i + B u
                 + kappa * sum_l s_i^l sgn(wbar_l' V_i z_i - wbar_l' xhat_i) mout_l
                 + kappa gamma * sum_{j in N_i} (xhat_j - xhat_i)

With wbar_l = w_l and mout_l = v_l this is the general variant; the lyapunov
variant pre-multiplies the dual rows by the square root of Pbar = V' P V for
a certificate P > 0 with P A + A' P <= 0 and sends the signs out through
V sqrt(Pbar)^-1, which makes the tail error bound below hold globally, for
any gains and any initial conditions.

This module is a pure dynamics library: reference right-hand sides, gain
formulas, bounds, and residual logic. Integration lives in sim/backend.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidLyapunovCertificate
from .median import sgn


@dataclass(frozen=True)
class EstimatorConfig:
    """Gains plus the correction maps used by the network right-hand side.

    Wbar rows are the correction functionals, Mout their output basis, so the
    correction term is kappa * Mout @ (s_i * sgn(Wbar V_i z_i - Wbar xhat_i)).
    output_norm is the induced 2-norm of Mout, the factor appearing in the
    tail bound.
    """

    kappa: float
    gamma: float
    variant: str
    Wbar: np.ndarray
    Mout: np.ndarray
    P: np.ndarray = None
    Pbar: np.ndarray = None
    sqrt_Pbar: np.ndarray = None

    @property
    def output_norm(self):
        return float(np.linalg.norm(self.Mout, 2))


def _sym_sqrt_and_inv(M, floor=1e-12):
    w, U = np.linalg.eigh(M)
    if w[-1] <= 0 or w[0] <= floor * w[-1]:
        raise InvalidLyapunovCertificate("projected certificate is not "
                                         "positive definite")
    rt = np.sqrt(w)
    return (U * rt) @ U.T, (U / rt) @ U.T


def make_estimator_config(basis, kappa, gamma, variant="general", P=None,
                          A=None, cert_tol=1e-9):
    """Build an EstimatorConfig for the given shared basis.

    The lyapunov variant needs the plant matrix A (for the certificate check)
    and a symmetric positive definite P with P A + A' P <= cert_tol; P
    defaults to the identity.
    """
    if kappa <= 0 or gamma <= 0:
        raise ValueError("kappa and gamma must be positive")
    if variant == "general":
        return EstimatorConfig(float(kappa), float(gamma), variant,
                               basis.W.copy(), basis.V.copy())
    if variant != "lyapunov":
        raise ValueError(f"unknown estimator variant {variant!r}")
    n = basis.n
    P = np.eye(n) if P is None else np.atleast_2d(np.asarray(P, dtype=np.float64))
    if P.shape != (n, n) or np.max(np.abs(P - P.T)) > 1e-12 * max(1.0, np.abs(P).max()):
        raise InvalidLyapunovCertificate("P must be symmetric n x n")
    if A is None:
        raise ValueError("lyapunov variant needs the plant matrix A")
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    lyap = P @ A + A.T @ P
    lam = np.linalg.eigvalsh(0.5 * (lyap + lyap.T))
    if lam[-1] > cert_tol:
        raise InvalidLyapunovCertificate(
            f"P A + A'P has eigenvalue {lam[-1]:.3e} > {cert_tol:g}")
    if np.linalg.eigvalsh(P)[0] <= 0:
        raise InvalidLyapunovCertificate("P is not positive definite")
    Pbar = basis.V.T @ P @ basis.V
    Pbar = 0.5 * (Pbar + Pbar.T)
    sqrtP, inv_sqrtP = _sym_sqrt_and_inv(Pbar)
    return EstimatorConfig(float(kappa), float(gamma), variant,
                           sqrtP @ basis.W, basis.V @ inv_sqrtP,
                           P=P, Pbar=Pbar, sqrt_Pbar=sqrtP)


def partial_observer_rhs(z_i, u, y_i, bank, plant):
    """Literal partial-observer right-hand side
    W_i (A V_i z_i + B u) + L_i (y_i - C_i V_i z_i)."""
    if bank.o_i == 0:
        return np.zeros(0)
    xr = bank.V_i @ z_i
    return (bank.W_i @ (plant.A @ xr + plant.B @ u)
            + bank.L_i @ (np.asarray(y_i, dtype=np.float64) - bank.C_i @ xr))


def _correction(xhat_i, z_i, bank, basis, config):
    arg = (config.Wbar @ bank.V_i) @ z_i - config.Wbar @ xhat_i
    sg = np.empty(basis.n)
    ind = basis.indicators[bank.index]
    for l in range(basis.n):
        sg[l] = ind[l] * sgn(arg[l])
    return config.Mout @ sg


def resilient_rhs(xhat_i, neighbor_states, z_i, u, plant, bank, basis, config):
    """Network estimator right-hand side for one agent (either variant)."""
    corr = _correction(xhat_i, z_i, bank, basis, config)
    coup = np.zeros(plant.n)
    for xj in neighbor_states:
        coup += np.asarray(xj, dtype=np.float64) - xhat_i
    return (plant.A @ xhat_i + plant.B @ u) + config.kappa * corr \
        + (config.kappa * config.gamma) * coup


def resilient_rhs_general(xhat_i, neighbor_states, z_i, u, plant, bank, basis,
                          config):
    if config.variant != "general":
        raise ValueError("config is not the general variant")
    return resilient_rhs(xhat_i, neighbor_states, z_i, u, plant, bank, basis, config)


def resilient_rhs_lyapunov(xhat_i, neighbor_states, z_i, u, plant, bank, basis,
                           config):
    if config.variant != "lyapunov":
        raise ValueError("config is not the lyapunov variant")
    return resilient_rhs(xhat_i, neighbor_states, z_i, u, plant, bank, basis, config)


def estimation_error_bound(n_agents, n, gamma, lam2, output_norm):
    """Guaranteed tail radius (N n^2 + sqrt(n)) sqrt(N) / (gamma lambda_2)
    times the output-map norm, for the lyapunov variant."""
    if n_agents < 1 or n < 1:
        raise ValueError("need positive dimensions")
    if gamma <= 0 or lam2 <= 0:
        raise ValueError("gamma and lambda_2 must be positive")
    return (n_agents * n * n + np.sqrt(n)) * np.sqrt(n_agents) / (gamma * lam2) \
        * output_norm


def disagreement_bound(n_agents, n, gamma, lam2):
    """Tail bound sqrt(N n) / (gamma lambda_2) on the stacked
    disagreement norm W(t)."""
    if gamma <= 0 or lam2 <= 0:
        raise ValueError("gamma and lambda_2 must be positive")
    return np.sqrt(n_agents * n) / (gamma * lam2)


def plug_and_play_gains(n_max, n, s_target, output_norm):
    """Gains any agent can adopt knowing only a network-size cap.

    gamma is sized so the tail bound evaluated at the worst-case connectivity
    4/(N^2 - N) stays below s_target for every N <= n_max; kappa = 1/gamma
    with the product kappa * gamma == 1.0 exact in floating point (gamma is
    nudged by ulps if rounding breaks the identity).
    """
    if n_max < 2:
        raise ValueError("need a network-size cap of at least 2")
    if s_target <= 0:
        raise ValueError("target radius must be positive")
    lam2_floor = 4.0 / (n_max * n_max - n_max)
    gamma = output_norm * np.sqrt(n_max) * (n_max * n * n + np.sqrt(n)) \
        / (lam2_floor * s_target)
    gamma = float(gamma)
    for _ in range(128):
        kappa = 1.0 / gamma
        if kappa * gamma == 1.0 and estimation_error_bound(
                n_max, n, gamma, lam2_floor, output_norm) <= s_target:
            return kappa, gamma
        gamma = np.nextafter(gamma, np.inf)
    raise ArithmeticError("could not make kappa * gamma exactly 1.0")


def attack_residual(z_i, xhat_i, W_i):
    """Disagreement ||z_i - W_i xhat_i|| between an agent's partial estimate
    and the matching projection of its resilient estimate."""
    z_i = np.asarray(z_i, dtype=np.float64)
    if z_i.shape[0] == 0:
        return 0.0
    return float(np.linalg.norm(z_i - W_i @ np.asarray(xhat_i, dtype=np.float64)))


def detect_attacked(residuals, threshold, dwell, dt):
    """True iff the residual exceeds threshold continuously for at least
    dwell time units ((k - 1) dt with k consecutive samples)."""
    if threshold <= 0 or dwell <= 0 or dt <= 0:
        raise ValueError("threshold, dwell and dt must be positive")
    run = 0
    for r in np.asarray(residuals, dtype=np.float64):
        if r > threshold:
            run += 1
            if (run - 1) * dt >= dwell:
                return True
        else:
            run = 0
    return False
