"""Exception types shared across the package.

The CLI maps each family to an exit code: usage problems exit 1, bad input
data exits 2, numerical failures exit 3.
"""


class MdsFeatError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class DimensionError(MdsFeatError, ValueError):
    exit_code = 2


class InvalidArgumentError(MdsFeatError, ValueError):
    exit_code = 1


class DataError(MdsFeatError, ValueError):
    """Input data is malformed (asymmetric matrix, unreadable image, ...)."""

    exit_code = 2


class IngestionError(DataError):
    pass


class ConnectivityError(DataError):
    """A neighbourhood graph fell apart into several components."""

    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


class MeasurementError(DataError):
    """A distance measure produced a negative or non-finite value."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class NumericalError(MdsFeatError, ArithmeticError):
    """Optimization or factorization broke down.

    ``last_iterate`` carries the last finite point reached, when there is one.
    """

    exit_code = 3

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class DegenerateConfigurationError(NumericalError):
    pass
