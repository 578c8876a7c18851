"""Exception hierarchy shared by all modules."""


class SbmError(Exception):
    """Base class for library errors."""

    exit_code = 4


class DomainError(SbmError, ValueError):
    """Argument outside the domain of a function (e.g. lambda <= 0)."""

    exit_code = 2


class ParameterError(DomainError):
    """Family parameters outside their admissible range."""


class ConvergenceError(SbmError, ArithmeticError):
    """A numerical procedure failed to converge or produced an invalid value."""

    exit_code = 4


class CertificationError(SbmError):
    """Scaling-index certification failed; carries the offending side and pair."""

    exit_code = 3

    def __init__(self, message, side=None, pair=None):
        super().__init__(message)
        self.side = side
        self.pair = pair


class BorderlineError(SbmError):
    """Transience test could not decide (index equals d/2 within tolerance)."""

    exit_code = 4


class TableResolutionError(SbmError):
    """A tabulated sampler was asked for a time step it was not built for."""

    exit_code = 2


class McError(SbmError):
    """Monte Carlo run unusable (horizon exhaustion, under-filled targets)."""

    exit_code = 4


class BoundViolationWarning(UserWarning):
    """Computed density exceeds a theoretical upper bound beyond tolerance."""
