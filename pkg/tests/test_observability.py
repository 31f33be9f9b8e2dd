import numpy as np
import pytest
from scipy.linalg import expm

from medest.errors import (BasisMismatch, CombinatorialLimit,
                           NoSharedBasisFound, StructureViolation,
                           UnobservablePair)
from medest.observability import (PlantModel, build_observer_banks,
                                  check_redundant_observability,
                                  check_shared_basis, construct_shared_basis,
                                  design_observer_gain,
                                  find_unobservable_subset, kalman_decompose,
                                  observability_matrix, unobservable_subspace,
                                  verify_indicator_redundancy)


def _three_inertia():
    k, b, J = 1.37, 0.007, 0.01
    a, d = k / J, b / J
    A = np.array([
        [0, 1, 0, 0, 0, 0],
        [-a, -d, a, 0, 0, 0],
        [0, 0, 0, 1, 0, 0],
        [a, 0, -2 * a, -d, a, 0],
        [0, 0, 0, 0, 0, 1],
        [0, 0, a, 0, -a, -d],
    ], dtype=float)
    B = np.array([[0.0], [1 / J], [0.0], [0.0], [0.0], [0.0]])
    C = (np.array([[1, 0, 0, 0, 0, 0]], dtype=float),
         np.array([[0, 0, 1, 0, 0, 0]], dtype=float),
         np.array([[0, 0, 0, 0, 1, 0]], dtype=float),
         np.array([[1, 0, -1, 0, 0, 0]], dtype=float),
         np.array([[0, 0, 1, 0, -1, 0]], dtype=float))
    return PlantModel(A, B, C)


def test_observability_matrix_shape_and_rank():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    C = np.array([[1.0, 0.0]])
    O = observability_matrix(A, C)
    assert O.shape == (2, 2)
    assert np.linalg.matrix_rank(O) == 2
    # velocity-only sensing cannot see position
    O2 = observability_matrix(A, np.array([[0.0, 1.0]]))
    assert np.linalg.matrix_rank(O2) == 1


def test_unobservable_subspace_matches_matrix_kernel():
    rng = np.random.default_rng(0)
    for _ in range(25):
        n = int(rng.integers(2, 6))
        m = int(rng.integers(1, 3))
        A = rng.normal(size=(n, n))
        C = rng.normal(size=(m, n))
        if rng.random() < 0.5:
            C[:, rng.integers(0, n)] = 0.0
        Q = unobservable_subspace(A, C)
        O = observability_matrix(A, C)
        dim = n - np.linalg.matrix_rank(O, tol=1e-8 * max(1.0, np.linalg.norm(O, 2)))
        assert Q.shape[1] == dim
        if dim:
            assert np.max(np.abs(O @ Q)) < 1e-7 * max(1.0, np.abs(O).max())
            # A-invariance of the subspace
            P = Q @ Q.T
            AQ = A @ Q
            assert np.max(np.abs(AQ - P @ AQ)) < 1e-7 * max(1.0, np.abs(A).max())


def test_unobservable_subspace_zero_output_flow():
    # states in the subspace produce exactly unobservable output trajectories
    A = np.array([[0.0, 1.0, 0.0], [-2.0, -0.5, 1.0], [0.0, 0.0, -1.0]])
    C = np.array([[0.0, 0.0, 1.0]])
    Q = unobservable_subspace(A, C)
    for k in range(Q.shape[1]):
        x0 = Q[:, k]
        for t in (0.1, 0.7, 2.0):
            y = C @ expm(A * t) @ x0
            assert np.max(np.abs(y)) < 1e-8


def test_unobservable_subspace_conditioning():
    # widely spread eigenvalues: naive power stacking loses rank digits,
    # the refinement must still find the exact 1-D kernel
    A = np.diag([1e4, 1.0, 1e-4])
    C = np.array([[1.0, 1.0, 0.0]])
    Q = unobservable_subspace(A, C)
    assert Q.shape == (3, 1)
    assert abs(abs(Q[2, 0]) - 1.0) < 1e-12


def test_three_inertia_unobservable_structure():
    plant = _three_inertia()
    dims = [unobservable_subspace(plant.A, c).shape[1] for c in plant.C_blocks]
    assert dims == [0, 2, 0, 2, 2]


def test_construct_basis_all_observable_identity():
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    C = (np.eye(2), np.array([[1.0, 0.0], [0.0, 1.0]]))
    basis = construct_shared_basis(PlantModel(A, None, C))
    assert np.array_equal(basis.V, np.eye(2))
    assert basis.indicators.all()


def test_construct_basis_distinct_eigenvalues():
    plant = _three_inertia()
    basis = construct_shared_basis(plant)
    counts = basis.indicators.sum(axis=0).astype(int)
    assert sorted(counts.tolist()) == [3, 3, 4, 4, 5, 5]
    # every agent's unobservable dimension shows up as zero indicators
    assert [int((basis.indicators[i] == 0).sum()) for i in range(5)] == \
        [0, 2, 0, 2, 2]


def test_construct_basis_greedy_merge_on_repeated_eigenvalues():
    A = np.array([[-1.0, 0.0, 0.0], [0.0, -1.0, 1.0], [0.0, 0.0, -1.0]])
    C = (np.array([[1.0, 1.0, 0.0]]),
         np.array([[1.0, -1.0, 0.0]]),
         np.array([[2.0, 2.0, 0.0]]))
    basis = construct_shared_basis(PlantModel(A, None, C))
    # directions (1,-1,0) and (1,1,0) must appear among the columns
    cols = [basis.V[:, k] / np.max(np.abs(basis.V[:, k])) for k in range(3)]

    def has(direction):
        d = np.asarray(direction) / np.max(np.abs(direction))
        return any(np.allclose(c, d) or np.allclose(c, -d) for c in cols)

    assert has([1.0, -1.0, 0.0])
    assert has([1.0, 1.0, 0.0])


def test_check_shared_basis_explicit_accept():
    A = np.array([[-1.0, 0.0, 0.0], [0.0, -1.0, 1.0], [0.0, 0.0, -1.0]])
    C = (np.array([[1.0, 1.0, 0.0]]),
         np.array([[1.0, -1.0, 0.0]]),
         np.array([[2.0, 2.0, 0.0]]))
    V = np.array([[1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 0.0, 1.0]])
    basis = check_shared_basis(PlantModel(A, None, C), V)
    assert np.array_equal(basis.indicators,
                          np.array([[1, 0, 1], [0, 1, 1], [1, 0, 1]]))


def test_check_shared_basis_mismatch_names_agent():
    A = np.array([[-1.0, 0.0, 0.0], [0.0, -1.0, 1.0], [0.0, 0.0, -1.0]])
    C = (np.array([[1.0, 1.0, 0.0]]),
         np.array([[1.0, -1.0, 0.0]]),
         np.array([[1.0, 2.0, 0.0]]))
    V = np.array([[1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(BasisMismatch) as exc:
        check_shared_basis(PlantModel(A, None, C), V)
    assert exc.value.agent == 3


def test_redundant_observability_positive_and_negative():
    plant = _three_inertia()
    assert check_redundant_observability(plant, 1)
    assert check_redundant_observability(plant, 2) is False
    # q = 2 keeps N - 2q = 1 bank; some single bank must be blind
    w = find_unobservable_subset(plant, 2)
    assert w is not None and len(w) == 1
    sub = PlantModel(plant.A, plant.B, tuple(plant.C_blocks[i] for i in w))
    O = observability_matrix(plant.A, sub.stacked_C())
    assert np.linalg.matrix_rank(O, tol=1e-6) < plant.n


def test_redundant_observability_requires_2q_margin():
    plant = _three_inertia()
    with pytest.raises(ValueError):
        check_redundant_observability(plant, 3)  # 2q >= N


def test_combinatorial_cap():
    n = 42
    A = np.zeros((2, 2))
    C = tuple(np.ones((1, 2)) for _ in range(n))
    with pytest.raises(CombinatorialLimit):
        check_redundant_observability(PlantModel(A, None, C), 10, cap=1000)


def test_indicator_redundancy_counts():
    plant = _three_inertia()
    basis = construct_shared_basis(plant)
    assert verify_indicator_redundancy(basis, 1)
    assert not verify_indicator_redundancy(basis, 2)


def test_kalman_decompose_structure():
    plant = _three_inertia()
    basis = construct_shared_basis(plant)
    for i in range(plant.N):
        dec = kalman_decompose(plant, basis, i)
        o_i = dec.o_i
        assert dec.V_i.shape == (plant.n, o_i)
        if o_i < plant.n:
            # unobservable directions are invisible in the output map
            assert np.max(np.abs(plant.C_blocks[i] @ dec.Vt_i)) < 1e-9
        # observable block reproduces the restriction of A
        lhs = dec.W_i @ plant.A @ dec.V_i
        assert lhs.shape == (o_i, o_i)


def test_kalman_decompose_rejects_inconsistent_indicators():
    # hand-built basis object whose indicators contradict the plant: the
    # block zero structure cannot hold and the decomposition must refuse
    from medest.observability import SharedBasis
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    C = (np.array([[0.0, 1.0]]),)
    plant = PlantModel(A, None, C)
    bad = SharedBasis(np.eye(2), np.eye(2), np.array([[1, 0]]))
    with pytest.raises(StructureViolation):
        kalman_decompose(plant, bad, 0)


def test_observer_gain_places_stable_spectrum():
    rng = np.random.default_rng(3)
    for _ in range(15):
        o = int(rng.integers(1, 5))
        Ao = rng.normal(size=(o, o))
        Co = rng.normal(size=(1, o))
        if np.linalg.matrix_rank(observability_matrix(Ao, Co)) < o:
            continue
        L = design_observer_gain(Ao, Co, -2.0)
        eigs = np.linalg.eigvals(Ao - L @ Co)
        assert np.max(eigs.real) < -1e-6


def test_observer_gain_unobservable_pair_rejected():
    Ao = np.array([[1.0, 0.0], [0.0, 2.0]])
    Co = np.array([[1.0, 0.0]])
    with pytest.raises(UnobservablePair):
        design_observer_gain(Ao, Co, -1.0)


def test_build_observer_banks_three_inertia():
    plant = _three_inertia()
    basis = construct_shared_basis(plant)
    banks = build_observer_banks(plant, basis, -1.0)
    assert [b.o_i for b in banks] == [6, 4, 6, 4, 4]
    for b in banks:
        if b.o_i:
            assert np.max(np.linalg.eigvals(b.F_i).real) < -1e-8


def test_noshared_basis_raises():
    A = np.array([[-1.0, 0.0, 0.0], [0.0, -1.0, 1.0], [0.0, 0.0, -1.0]])
    C = (np.array([[1.0, 1.0, 0.0]]),
         np.array([[1.0, -1.0, 0.0]]),
         np.array([[1.0, 2.0, 0.0]]))
    with pytest.raises(NoSharedBasisFound):
        construct_shared_basis(PlantModel(A, None, C))
