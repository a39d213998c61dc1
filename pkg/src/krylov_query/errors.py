"""Exception hierarchy for krylov-query."""
from typing import Optional


class KrylovQueryError(Exception):
    """Base class for every error raised by the toolkit."""


class NotHermitian(KrylovQueryError):
    """Matrix failed the Hermitian check."""

    def __init__(self, max_deviation: float, tolerance: float):
        self.max_deviation = max_deviation
        self.tolerance = tolerance
        super().__init__(
            f"matrix is not Hermitian: max |M - M^H| = {max_deviation:.3e} "
            f"exceeds tolerance {tolerance:.3e}"
        )


class DimensionMismatch(KrylovQueryError, ValueError):
    """Operands have incompatible shapes."""


class ConvergenceFailure(KrylovQueryError):
    """An iterative kernel hit its iteration cap."""

    def __init__(self, iterations: int, message: Optional[str] = None):
        self.iterations = iterations
        super().__init__(message or f"no convergence after {iterations} iterations")


class EmptySpan(KrylovQueryError):
    """All input vectors are numerically zero."""


class OverflowGuard(KrylovQueryError):
    """An exponent is large enough to overflow double precision."""


class PoleProximity(KrylovQueryError):
    """Evaluation point sits on (or too close to) an atom of the measure."""

    def __init__(self, atom_index: int, distance: float):
        self.atom_index = atom_index
        self.distance = distance
        super().__init__(f"z is {distance:.3e} away from atom {atom_index}")


class ZeroDenominator(KrylovQueryError):
    """Continued-fraction evaluation produced a vanishing denominator."""


class SingularAtom(KrylovQueryError):
    """Target function is singular at an occupied atom."""

    def __init__(self, atom: float, guard: float):
        self.atom = atom
        self.guard = guard
        super().__init__(f"atom {atom:.6g} lies within {guard:.3e} of the singularity")


class SingularOnInterval(KrylovQueryError):
    """Target function is not finite (or not defined) on the comparison interval."""


class IndexOutOfRange(KrylovQueryError, IndexError):
    """Degree or index outside the admissible range."""


class IllConditioned(KrylovQueryError):
    """Least-squares system too ill-conditioned to trust."""

    def __init__(self, condition: float, limit: float):
        self.condition = condition
        self.limit = limit
        super().__init__(f"Gram matrix condition {condition:.3e} exceeds {limit:.3e}")


class DegreeCapExceeded(KrylovQueryError):
    """No degree up to the configured cap reaches the requested accuracy."""

    def __init__(self, max_degree: int):
        self.max_degree = max_degree
        super().__init__(f"no interpolant of degree <= {max_degree} reaches the tolerance")


class ConfigParse(KrylovQueryError):
    """Scenario file could not be parsed or failed validation."""

    def __init__(self, field_path: str, message: str):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}" if field_path else message)


class IoFailure(KrylovQueryError):
    """Reading a scenario file or writing a report failed."""


class CertificateFailure(KrylovQueryError):
    """Counted application missed epsilon or used a query count other than n_mu.

    Attributes:
        report: The uncertified QueryReport
    """

    def __init__(self, report):
        self.report = report
        super().__init__(
            f"query certificate failed: matvecs={report.matvec_count} n_mu={report.n_mu} "
            f"error={report.achieved_error:.3e} eps={report.epsilon:.3e}"
        )
