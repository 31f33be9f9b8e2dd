"""Resilient fully distributed state estimation under sparse sensor attacks.

A network of agents, each owning one sensor bank, runs a partial observer
for its locally observable subspace plus a signum-coupled consensus layer
that recovers a median over the directions each agent can see. Up to q
compromised banks are tolerated when every basis direction is covered by at
least 2q+1 banks and the communication graph stays connected.
"""

from .backend import BACKEND, get_kernels
from .errors import (AuditFailure, BasisMismatch, CombinatorialLimit,
                     InvalidLyapunovCertificate, MedestError,
                     NoIndicatedValues, NoSharedBasisFound, NumericalBlowup,
                     ScenarioFormatError, SingularBasis, StructureViolation,
                     UnobservablePair)
from .estimator import (EstimatorConfig, attack_residual, detect_attacked,
                        disagreement_bound, estimation_error_bound,
                        make_estimator_config, partial_observer_rhs,
                        plug_and_play_gains, resilient_rhs,
                        resilient_rhs_general, resilient_rhs_lyapunov)
from .graph import (Topology, algebraic_connectivity, is_connected, laplacian,
                    orthonormal_complement, random_connected_topology)
from .median import (MedianProblem, MedianRun, MedianSet,
                     centralized_median_rhs, default_horizon,
                     distributed_median_rhs, median_consensus_error_bound,
                     median_set, run_median_solver, sgn)
from .observability import (KalmanDecomposition, ObserverBank, PlantModel,
                            SharedBasis, build_observer_banks,
                            check_redundant_observability, check_shared_basis,
                            construct_shared_basis, design_observer_gain,
                            find_unobservable_subset, kalman_decompose,
                            observability_matrix, unobservable_subspace,
                            verify_indicator_redundancy)
from .scenario_io import (bundled_scenario_path, csv_column_names,
                          list_bundled, load_scenario, resolve_scenario,
                          save_scenario, scenario_from_dict, scenario_to_dict,
                          sidecar_dict, write_log_csv, write_sidecar)
from .sim import (AttackProfile, AuditCheck, AuditReport, InitialCondition,
                  Scenario, Signal, TrajectoryLog, applicable_bounds,
                  attack_signal, audit_assumptions, prepare,
                  reconstruction_residual, run_scenario, tail_metrics)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "get_kernels",
    "MedestError", "NoIndicatedValues", "SingularBasis", "BasisMismatch",
    "NoSharedBasisFound", "StructureViolation", "UnobservablePair",
    "InvalidLyapunovCertificate", "CombinatorialLimit", "AuditFailure",
    "NumericalBlowup", "ScenarioFormatError",
    "Topology", "laplacian", "algebraic_connectivity", "is_connected",
    "orthonormal_complement", "random_connected_topology",
    "sgn", "MedianSet", "MedianProblem", "MedianRun", "median_set",
    "centralized_median_rhs", "distributed_median_rhs",
    "median_consensus_error_bound", "default_horizon", "run_median_solver",
    "PlantModel", "SharedBasis", "ObserverBank", "KalmanDecomposition",
    "observability_matrix", "unobservable_subspace", "construct_shared_basis",
    "check_shared_basis", "check_redundant_observability",
    "find_unobservable_subset", "verify_indicator_redundancy",
    "kalman_decompose", "design_observer_gain", "build_observer_banks",
    "EstimatorConfig", "make_estimator_config", "partial_observer_rhs",
    "resilient_rhs", "resilient_rhs_general", "resilient_rhs_lyapunov",
    "estimation_error_bound", "disagreement_bound", "plug_and_play_gains",
    "attack_residual", "detect_attacked",
    "Signal", "AttackProfile", "InitialCondition", "Scenario", "AuditCheck",
    "AuditReport", "TrajectoryLog", "attack_signal", "audit_assumptions",
    "prepare", "run_scenario", "tail_metrics", "applicable_bounds",
    "reconstruction_residual",
    "load_scenario", "save_scenario", "scenario_from_dict", "scenario_to_dict",
    "bundled_scenario_path", "list_bundled", "resolve_scenario",
    "csv_column_names", "write_log_csv", "write_sidecar", "sidecar_dict",
]
