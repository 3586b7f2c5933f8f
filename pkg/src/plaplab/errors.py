"""Exception types shared across the package.

The CLI maps these onto process exit codes, so solver code should raise
the most specific type that applies rather than bare ValueError.
"""


class ConfigurationError(ValueError):
    """Invalid problem or run configuration (bad grid, bad exponent,
    boundary data below the obstacle, unknown config keys, ...)."""


class DomainError(ValueError):
    """A point or region falls outside the computational box."""


class InfeasibleError(RuntimeError):
    """A field that should satisfy u >= phi violates it beyond tolerance."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class MeasurementError(ValueError):
    """A free-boundary measurement was requested on a region the grid
    cannot support (ball leaves the box, radius under the resolution
    floor, empty shell, ...)."""


class PreconditionError(ValueError):
    """A hypothesis required by the measurement is violated; the message
    names the hypothesis."""


class NumericalError(RuntimeError):
    """Arithmetic breakdown inside a solver kernel (bracket expansion
    failed, non-finite values), usually a corrupted input field."""


class ParseError(ValueError):
    """Expression text could not be parsed; carries offset and expectation."""

    def __init__(self, message, offset, expected=None):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset
        self.expected = expected


class EvaluationError(ValueError):
    """Strict expression arithmetic failed (division by zero, 0 raised
    to a negative power, fractional power of a negative base, square
    root of a negative number, unbound variable)."""
