"""Exception hierarchy shared by the library and the command line."""


class GraphGPError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ValidationError(GraphGPError, ValueError):
    """Invalid input: shapes, parameter ranges, malformed files."""

    exit_code = 2


class DegenerateError(ValidationError):
    """Input is well-formed but carries no usable signal (zero power, zero filter)."""


class NumericalError(GraphGPError, ArithmeticError):
    """A computation produced non-finite or otherwise unusable values.

    ``context`` carries whatever the caller needs to reproduce the failure,
    e.g. the offending hyperparameters or an optimizer trace.
    """

    exit_code = 3

    def __init__(self, message, context=None):
        super().__init__(message)
        self.context = context


class EigensolverError(NumericalError):
    """The symmetric eigensolver failed to converge."""


class DivergenceError(NumericalError):
    """An optimizer objective became non-finite."""


class FileFormatError(GraphGPError, OSError):
    """Unreadable, unwritable or corrupt file."""

    exit_code = 4
