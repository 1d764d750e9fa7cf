"""
Error Taxonomy
Exceptions and warnings shared by the operator, spectral and report packages
"""


class GribovError(Exception):
    """Base class for every error raised by this package"""


class ValidationError(GribovError, ValueError):
    """Raised when user-supplied input is invalid (CLI exit code 2)"""


class InvalidTruncationError(ValidationError):
    """Truncation size outside the admissible range"""


class InvalidParameterError(ValidationError):
    """
    Coupling or exponent outside its admissible range.

    Carries the (field, reason) violations found by spec validation, if any.
    """

    def __init__(self, msg: str, violations: list[tuple[str, str]] | None = None):
        super().__init__(msg)
        self.violations = list(violations or [])


class InvalidIndexError(ValidationError):
    """Index pair outside the off-diagonal set"""


class InvalidInputError(ValidationError):
    """Malformed argument: empty collections, shape mismatches, bad documents"""


class UnsupportedConfigurationError(ValidationError):
    """Well-formed input for which no enclosure construction is defined"""


class NumericalError(GribovError, RuntimeError):
    """Raised when a numerical method fails (CLI exit code 3)"""


class IterationLimitError(NumericalError):
    """
    Shifted QR iteration ran out of its sweep budget.

    The eigenvalues deflated before the budget ran out are kept in
    ``partial_eigenvalues``.
    """

    def __init__(self, msg: str, partial_eigenvalues, iterations: int):
        super().__init__(msg)
        self.partial_eigenvalues = partial_eigenvalues
        self.iterations = iterations


class IllSeparatedClustersError(NumericalError):
    """Invariant subspaces of two eigenvalue clusters overlap numerically"""


class DefectiveClusterWarning(RuntimeWarning):
    """Inverse iteration stagnated; the eigenvector basis is numerically defective"""


class PreconditionWarning(UserWarning):
    """A hypothesis of the underlying statement is unmet; the value is still computed"""
