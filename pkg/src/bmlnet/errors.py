"""Exception hierarchy shared by every module."""


class BMLError(Exception):
    """Base class for all package errors."""


class ShapeError(BMLError, ValueError):
    """Malformed lattice shape (non-positive dims, bad shape string)."""


class ConfigurationError(BMLError, ValueError):
    """A Configuration violates one of its invariants."""


class DuplicateCellError(ConfigurationError):
    pass


class CoordinateRangeError(ConfigurationError):
    pass


class TypeRangeError(ConfigurationError):
    pass


class OccupancyMismatchError(ConfigurationError):
    pass


class ParticleCountError(ConfigurationError):
    pass


class BudgetExceededError(BMLError):
    """An enumeration or cycle search would exceed its configured cap."""

    def __init__(self, message: str, required: int | None = None):
        super().__init__(message)
        self.required = required


class HypothesisError(BMLError, ValueError):
    """Verification requested outside m <= d/2 without an override."""


class CounterexampleError(BMLError):
    """Exhaustive verification found an initial state that never frees up."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class EmptyWindowError(BMLError, ValueError):
    pass
