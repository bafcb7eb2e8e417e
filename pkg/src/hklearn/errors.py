"""Exception types shared across the library."""


class HklearnError(Exception):
    """Base class for all library errors."""


class InvalidInput(HklearnError):
    """An argument violates a documented precondition (shape, range, alignment)."""


class UnsupportedEvaluation(HklearnError):
    """The requested evaluation has no functional form (ideal / precomputed kernels)."""


class NumericalFailure(HklearnError):
    """A factorization or solve failed beyond repair (jitter retries exhausted)."""


class ConvergenceFailure(HklearnError):
    """An iterative solver stopped before reaching its optimality tolerance.

    Carries the worst remaining KKT violation in ``violation``.
    """

    def __init__(self, message: str, violation: float = float("nan")):
        super().__init__(message)
        self.violation = violation


class ResourceLimit(HklearnError):
    """A memory or size estimate exceeds the configured cap; use the scaling path."""


class FormatError(HklearnError):
    """An input file cannot be parsed (ragged rows, non-numeric cells, bad shape)."""


class PipelineFailure(HklearnError):
    """Every candidate in a search failed to fit."""


class SlopeUndefined(HklearnError):
    """A log-log slope was requested with fewer than two sample sizes."""


class StratificationWarning(UserWarning):
    """A class is too small to stratify; the split falls back to unstratified."""
