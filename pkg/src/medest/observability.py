"""Static plant analysis: unobservable subspaces, shared bases, redundancy
audits, observable/unobservable decompositions, and observer gain design.

The unobservable subspace of a pair (C, A) is the null space of the stacked
observability matrix col(C, CA, ..., CA^{n-1}). Forming the matrix powers
explicitly is numerically treacherous for stiff plants (singular-value
artifacts of A^k land exactly at rank tolerance), so the subspace is computed
by the equivalent invariant-subspace refinement

    S_0 = ker C,    S_{k+1} = { x in S_k : A x in S_k },

which terminates at the largest A-invariant subspace contained in ker C and
never forms a power of A. Rank decisions use singular values relative to
max(sigma_max, ||A||) so exactly-zero blocks rank as zero.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.signal

from .errors import (BasisMismatch, CombinatorialLimit, NoSharedBasisFound,
                     SingularBasis, StructureViolation, UnobservablePair)

RANK_TOL = 1e-8           # default relative singular-value cutoff
SUBSET_CAP = 10 ** 6      # exhaustive-enumeration refusal threshold


@dataclass(frozen=True)
class PlantModel:
    """LTI plant dx/dt = A x + B u with N output banks y_i = C_i x."""

    A: np.ndarray
    B: np.ndarray
    C_blocks: tuple

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        if A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        # B=None means an autonomous plant; keep a zero column so shapes hold
        B = (np.zeros((A.shape[0], 1)) if self.B is None
             else np.atleast_2d(np.asarray(self.B, dtype=np.float64)))
        if B.shape[0] != A.shape[0]:
            raise ValueError("B must have as many rows as A")
        blocks = tuple(np.atleast_2d(np.asarray(C, dtype=np.float64))
                       for C in self.C_blocks)
        if not blocks:
            raise ValueError("need at least one output bank")
        for k, C in enumerate(blocks):
            if C.shape[1] != A.shape[0]:
                raise ValueError(f"C block {k + 1} must have {A.shape[0]} columns")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C_blocks", blocks)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def p(self):
        return self.B.shape[1]

    @property
    def N(self):
        return len(self.C_blocks)

    @property
    def m_sizes(self):
        return tuple(C.shape[0] for C in self.C_blocks)

    def stacked_C(self, which=None):
        which = range(self.N) if which is None else which
        return np.vstack([self.C_blocks[i] for i in which])


def observability_matrix(A, C):
    """Stacked col(C, CA, ..., CA^{n-1}); reference definition only."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    C = np.atleast_2d(np.asarray(C, dtype=np.float64))
    rows = [C]
    for _ in range(A.shape[0] - 1):
        rows.append(rows[-1] @ A)
    return np.vstack(rows)


def _null_basis(M, rtol, scale=None):
    """Orthonormal null-space basis with rank cutoff relative to
    max(sigma_max, scale)."""
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    if M.shape[0] == 0 or M.size == 0:
        return np.eye(M.shape[1])
    _, sv, vt = np.linalg.svd(M)
    ref = max(sv[0] if sv.size else 0.0, scale if scale is not None else 0.0)
    rank = int(np.sum(sv > rtol * ref)) if ref > 0.0 else 0
    return np.ascontiguousarray(vt[rank:].T)


def unobservable_subspace(A, C, rtol=RANK_TOL):
    """Orthonormal basis of the unobservable subspace of (C, A); shape (n, d),
    d = 0 when the pair is observable."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    C = np.atleast_2d(np.asarray(C, dtype=np.float64))
    n = A.shape[0]
    a_scale = max(1.0, float(np.linalg.norm(A, 2)))
    Q = _null_basis(C, rtol)
    while Q.shape[1] > 0:
        # complement P of span(Q); the part of A Q leaving span(Q) is P^T A Q
        P = _null_basis(Q.T, rtol)
        M = P.T @ A @ Q
        coef = _null_basis(M, rtol, scale=a_scale)
        if coef.shape[1] == Q.shape[1]:
            return Q
        Q = Q @ coef
        if Q.shape[1] == 0:
            break
        Q, _ = np.linalg.qr(Q)
    return np.zeros((n, 0))


@dataclass(frozen=True)
class SharedBasis:
    """Basis columns v_l of V, dual rows w_l of W = V^{-1}, and the N x n
    indicator table: indicators[i, l] = 0 iff v_l spans part of bank i's
    unobservable subspace."""

    V: np.ndarray
    W: np.ndarray
    indicators: np.ndarray

    @property
    def n(self):
        return self.V.shape[0]

    @property
    def N(self):
        return self.indicators.shape[0]

    def observable_columns(self, i):
        return np.flatnonzero(self.indicators[i] == 1)

    def unobservable_columns(self, i):
        return np.flatnonzero(self.indicators[i] == 0)


def check_shared_basis(plant, V, rtol=RANK_TOL):
    """Validate a candidate basis and populate the indicator table.

    For each agent the zero-indicator columns must span the agent's
    unobservable subspace exactly; otherwise BasisMismatch(i) is raised with
    the 1-based agent index. V must be invertible (condition number < 1e12).
    """
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    n = plant.n
    if V.shape != (n, n):
        raise ValueError(f"basis must be {n} x {n}")
    sv = np.linalg.svd(V, compute_uv=False)
    if sv[-1] <= 0.0 or sv[0] / sv[-1] >= 1e12:
        raise SingularBasis("candidate basis is numerically singular")
    W = np.linalg.inv(V)

    indicators = np.ones((plant.N, n), dtype=np.int64)
    for i in range(plant.N):
        U = unobservable_subspace(plant.A, plant.C_blocks[i], rtol)
        d = U.shape[1]
        for l in range(n):
            v = V[:, l]
            resid = v - U @ (U.T @ v) if d else v
            if np.linalg.norm(resid) <= rtol * np.linalg.norm(v):
                indicators[i, l] = 0
        zero_cols = V[:, indicators[i] == 0]
        if zero_cols.shape[1] != d:
            raise BasisMismatch(i + 1)
        if d:
            svz = np.linalg.svd(zero_cols, compute_uv=False)
            if int(np.sum(svz > rtol * svz[0])) != d:
                raise BasisMismatch(i + 1)
    return SharedBasis(V, W, indicators)


def _real_eigenbasis(A, rtol):
    """Real basis from the eigendecomposition of A, assuming all eigenvalues
    distinct: one unit column per real eigenvalue, Re/Im unit columns per
    conjugate pair. Returns None when eigenvalues repeat."""
    w, vec = np.linalg.eig(A)
    scale = max(1.0, float(np.max(np.abs(w))))
    for a, b in itertools.combinations(w, 2):
        if abs(a - b) <= rtol * scale:
            return None
    order = np.lexsort((np.abs(w.imag), w.real))
    w, vec = w[order], vec[:, order]
    cols = []
    used = np.zeros(w.shape[0], dtype=bool)
    for k in range(w.shape[0]):
        if used[k]:
            continue
        if abs(w[k].imag) <= rtol * scale:
            used[k] = True
            r = vec[:, k].real
            cols.append(r / np.linalg.norm(r))
        else:
            mate = None
            for j in range(k + 1, w.shape[0]):
                if not used[j] and abs(w[j] - np.conj(w[k])) <= rtol * scale:
                    mate = j
                    break
            if mate is None:
                return None
            used[k] = used[mate] = True
            re, im = vec[:, k].real, vec[:, k].imag
            cols.append(re / np.linalg.norm(re))
            cols.append(im / np.linalg.norm(im))
    return np.column_stack(cols)


def _subspace_intersection(P, Q, rtol):
    """Orthonormal basis of span(P) ∩ span(Q)."""
    if P.shape[1] == 0 or Q.shape[1] == 0:
        return np.zeros((P.shape[0], 0))
    coef = _null_basis(np.hstack([P, -Q]), rtol)
    if coef.shape[1] == 0:
        return np.zeros((P.shape[0], 0))
    X = P @ coef[:P.shape[1]]
    Qx, R = np.linalg.qr(X)
    keep = np.abs(np.diag(R)) > rtol * max(1.0, np.abs(R).max())
    return np.ascontiguousarray(Qx[:, keep])


def _greedy_merge_basis(plant, subspaces, rtol):
    """Greedy common-basis construction from the intersection lattice.

    Closes the given subspaces under pairwise intersection, then walks them in
    ascending dimension, topping up the collected columns so every lattice
    member is spanned by a subset. Raises NoSharedBasisFound when a top-up
    would make the collection dependent.
    """
    n = plant.n
    lattice = [U for U in subspaces if U.shape[1] > 0]
    changed = True
    guard = 0
    while changed and guard < 64:
        changed = False
        guard += 1
        for P, Q in itertools.combinations(list(lattice), 2):
            X = _subspace_intersection(P, Q, rtol)
            if X.shape[1] == 0:
                continue
            if any(X.shape[1] == L.shape[1]
                   and np.linalg.norm(X - L @ (L.T @ X)) <= rtol * np.sqrt(n)
                   for L in lattice):
                continue
            lattice.append(X)
            changed = True
    lattice.sort(key=lambda U: U.shape[1])

    cols = np.zeros((n, 0))
    for U in lattice:
        inside = [k for k in range(cols.shape[1])
                  if np.linalg.norm(cols[:, k] - U @ (U.T @ cols[:, k])) <= rtol]
        deficiency = U.shape[1] - len(inside)
        if deficiency <= 0:
            continue
        covered = cols[:, inside]
        fresh = U - covered @ (covered.T @ U) if covered.shape[1] else U
        Qf, R = np.linalg.qr(fresh)
        keep = np.abs(np.diag(R)) > rtol * max(1.0, np.abs(R).max())
        fresh = Qf[:, keep][:, :deficiency]
        if fresh.shape[1] < deficiency:
            raise NoSharedBasisFound("intersection lattice is not consistent "
                                     "with any single basis")
        cand = np.hstack([cols, fresh])
        svc = np.linalg.svd(cand, compute_uv=False)
        if svc[-1] <= rtol * svc[0]:
            raise NoSharedBasisFound("subspace directions are mutually "
                                     "dependent; no common basis exists for "
                                     "this heuristic")
        cols = cand
    if cols.shape[1] < n:
        rest = _null_basis(cols.T, rtol)
        cols = np.hstack([cols, rest])
    return cols


def construct_shared_basis(plant, rtol=RANK_TOL):
    """Heuristic shared-basis construction.

    (a) every bank fully observable: identity basis; (b) A has all-distinct
    eigenvalues: real eigenbasis; (c) greedy merge of the unobservable
    subspace intersection lattice. The result is always validated with
    check_shared_basis. Failure raises NoSharedBasisFound; that does not
    prove no basis exists, and an explicit basis can be supplied instead.
    """
    subspaces = [unobservable_subspace(plant.A, C, rtol) for C in plant.C_blocks]
    if all(U.shape[1] == 0 for U in subspaces):
        return check_shared_basis(plant, np.eye(plant.n), rtol)
    V = _real_eigenbasis(plant.A, rtol)
    if V is not None:
        try:
            return check_shared_basis(plant, V, rtol)
        except (BasisMismatch, SingularBasis):
            pass
    V = _greedy_merge_basis(plant, subspaces, rtol)
    try:
        return check_shared_basis(plant, V, rtol)
    except (BasisMismatch, SingularBasis) as exc:
        raise NoSharedBasisFound(f"greedy merge produced an invalid basis: {exc}")


def check_redundant_observability(plant, q, rtol=RANK_TOL, cap=SUBSET_CAP):
    """True iff the plant stays observable from every subset of N - 2q banks.

    Exhaustive over all C(N, 2q) removal subsets; refuses with
    CombinatorialLimit beyond the cap rather than running for hours.
    """
    if q < 0:
        raise ValueError("q must be nonnegative")
    N = plant.N
    if 2 * q >= N:
        raise ValueError("need 2q < N; identification is hopeless otherwise")
    if math.comb(N, 2 * q) > cap:
        raise CombinatorialLimit(f"C({N}, {2 * q}) exceeds the enumeration cap")
    for removed in itertools.combinations(range(N), 2 * q):
        kept = [i for i in range(N) if i not in removed]
        C = plant.stacked_C(kept)
        if unobservable_subspace(plant.A, C, rtol).shape[1] > 0:
            return False
    return True


def find_unobservable_subset(plant, q, rtol=RANK_TOL, cap=SUBSET_CAP):
    """First witness: a kept-bank subset of size N - 2q that is unobservable,
    or None if redundancy holds. Used for audit evidence."""
    N = plant.N
    if 2 * q >= N or math.comb(N, 2 * q) > cap:
        return None
    for removed in itertools.combinations(range(N), 2 * q):
        kept = [i for i in range(N) if i not in removed]
        if unobservable_subspace(plant.A, plant.stacked_C(kept), rtol).shape[1] > 0:
            return tuple(kept)
    return None


def verify_indicator_redundancy(basis, q):
    """True iff every indicator column sum is at least 2q + 1."""
    return bool(np.all(basis.indicators.sum(axis=0) >= 2 * q + 1))


@dataclass(frozen=True)
class KalmanDecomposition:
    V_i: np.ndarray     # n x o_i, observable basis columns
    W_i: np.ndarray     # o_i x n, matching dual rows
    Vt_i: np.ndarray    # n x (n - o_i), unobservable columns
    Wt_i: np.ndarray    # (n - o_i) x n
    o_i: int


def kalman_decompose(plant, basis, i, tol=1e-9):
    """Split basis columns by agent i's indicators and verify the block
    zero structure [*, 0; *, *] of the transformed A and [*, 0] of C_i."""
    obs = basis.observable_columns(i)
    uno = basis.unobservable_columns(i)
    V_i, Vt_i = basis.V[:, obs], basis.V[:, uno]
    W_i, Wt_i = basis.W[obs, :], basis.W[uno, :]
    o_i = len(obs)

    top_right = W_i @ plant.A @ Vt_i if o_i and len(uno) else np.zeros((o_i, len(uno)))
    c_right = plant.C_blocks[i] @ Vt_i if len(uno) else np.zeros((plant.C_blocks[i].shape[0], 0))
    if top_right.size and np.max(np.abs(top_right)) > tol:
        raise StructureViolation(f"agent {i + 1}: observable block feeds from "
                                 "unobservable directions")
    if c_right.size and np.max(np.abs(c_right)) > tol:
        raise StructureViolation(f"agent {i + 1}: output sees unobservable "
                                 "directions")
    return KalmanDecomposition(V_i, W_i, Vt_i, Wt_i, o_i)


def design_observer_gain(Ao, Co, pole_target=-1.0, rtol=RANK_TOL):
    """Output-injection gain L with eigenvalues of Ao - L Co near pole_target.

    Placement by duality on (Ao^T, Co^T); candidate pole clusters of three
    spreads are tried and the smallest-norm gain whose closed loop lands in
    the disc of radius 0.5 |pole_target| with real parts < pole_target / 2 is
    kept.
    """
    Ao = np.atleast_2d(np.asarray(Ao, dtype=np.float64))
    Co = np.atleast_2d(np.asarray(Co, dtype=np.float64))
    o = Ao.shape[0]
    m = Co.shape[0]
    if o == 0:
        return np.zeros((0, m))
    if pole_target >= 0:
        raise ValueError("pole_target must be negative")
    if unobservable_subspace(Ao, Co, rtol).shape[1] > 0:
        raise UnobservablePair("cannot place eigenvalues for an unobservable pair")

    if o == 1:
        # scalar state: L Co = Ao - pole_target, minimum-norm row solution
        c = Co[:, 0]
        L = (Ao[0, 0] - pole_target) * c / float(c @ c)
        return L.reshape(1, m)

    best = None
    best_norm = np.inf
    radius = 0.5 * abs(pole_target)
    for spread in (0.1, 0.2, 0.35):
        poles = pole_target + radius * spread * np.linspace(-1.0, 1.0, o)
        try:
            placed = scipy.signal.place_poles(Ao.T, Co.T, poles)
        except ValueError:
            continue
        L = placed.gain_matrix.T
        eig = np.linalg.eigvals(Ao - L @ Co)
        if np.max(eig.real) >= pole_target / 2.0:
            continue
        if np.max(np.abs(eig - pole_target)) > radius:
            continue
        nL = np.linalg.norm(L)
        if nL < best_norm:
            best, best_norm = L, nL
    if best is None:
        raise RuntimeError("pole placement failed for all candidate clusters")
    return best


@dataclass(frozen=True)
class ObserverBank:
    """Per-agent partial observer data: decomposition slices plus the cached
    blocks of dz_i/dt = F_i z_i + G_i u + L_i y_i."""

    index: int
    o_i: int
    V_i: np.ndarray
    W_i: np.ndarray
    Vt_i: np.ndarray
    Wt_i: np.ndarray
    L_i: np.ndarray
    C_i: np.ndarray
    F_i: np.ndarray
    G_i: np.ndarray
    C_obs: np.ndarray
    margin: float


def build_observer_banks(plant, basis, pole_target=-1.0, margin=0.1,
                         rtol=RANK_TOL, tol=1e-9):
    """Kalman-decompose every agent and design its injection gain.

    Agents with nothing observable get empty observers and participate in the
    network through coupling only.
    """
    banks = []
    for i in range(plant.N):
        dec = kalman_decompose(plant, basis, i, tol)
        Ao = dec.W_i @ plant.A @ dec.V_i
        Co = plant.C_blocks[i] @ dec.V_i
        L = design_observer_gain(Ao, Co, pole_target, rtol) if dec.o_i else \
            np.zeros((0, plant.C_blocks[i].shape[0]))
        F = Ao - L @ Co
        if dec.o_i and np.max(np.linalg.eigvals(F).real) > -margin:
            raise RuntimeError(f"agent {i + 1}: designed observer misses the "
                               f"stability margin {margin}")
        banks.append(ObserverBank(i, dec.o_i, dec.V_i, dec.W_i, dec.Vt_i,
                                  dec.Wt_i, L, plant.C_blocks[i], F,
                                  dec.W_i @ plant.B, Co, margin))
    return banks
