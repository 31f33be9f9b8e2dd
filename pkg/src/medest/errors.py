"""Exception types shared across the package.

Every failure mode that callers are expected to branch on gets its own class;
anything else propagates as the underlying ValueError/LinAlgError.
"""


class MedestError(Exception):
    """Base class for all package-specific errors."""


class NoIndicatedValues(MedestError):
    """Raised when a median problem has no indicated value (all s_i = 0)."""


class SingularBasis(MedestError):
    """Raised when a candidate basis matrix is numerically singular."""


class BasisMismatch(MedestError):
    """Raised when some agent's unobservable subspace is not spanned by a
    subset of the candidate basis columns.

    Attributes
    ----------
    agent : int
        1-based index of the first offending agent.
    """

    def __init__(self, agent, message=None):
        self.agent = int(agent)
        super().__init__(message or f"agent {self.agent}: unobservable subspace "
                                    "is not spanned by a subset of the basis")


class NoSharedBasisFound(MedestError):
    """Raised when the heuristic basis construction fails.

    This does not prove that no shared basis exists; supply one explicitly in
    the scenario file to proceed.
    """


class StructureViolation(MedestError):
    """Raised when the observable/unobservable block decomposition does not
    have the required zero pattern (invalid shared basis)."""


class UnobservablePair(MedestError):
    """Raised when gain design is asked for an unobservable (C, A) pair."""


class InvalidLyapunovCertificate(MedestError):
    """Raised when the supplied P is not positive definite or P A + A^T P has
    an eigenvalue above tolerance."""


class CombinatorialLimit(MedestError):
    """Raised when an exhaustive subset check would exceed the enumeration cap."""


class AuditFailure(MedestError):
    """Raised when a scenario fails its assumption audit and no override is set.

    Attributes
    ----------
    report : AuditReport
        The full audit report with per-check evidence.
    """

    def __init__(self, report, message=None):
        self.report = report
        super().__init__(message or "scenario failed assumption audit")


class NumericalBlowup(MedestError):
    """Raised when a simulated state norm exceeds the blowup threshold.

    Attributes
    ----------
    last_stable_time : float
        Last grid time at which all states were below the threshold.
    """

    def __init__(self, last_stable_time, message=None):
        self.last_stable_time = float(last_stable_time)
        super().__init__(message or f"state norm exceeded blowup threshold "
                                    f"(last stable time {self.last_stable_time:g})")


class ScenarioFormatError(MedestError):
    """Raised on malformed scenario files; message carries the key path."""
