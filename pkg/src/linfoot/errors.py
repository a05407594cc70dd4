"""Exception hierarchy.

Every error family carries an ``exit_code`` so the command line front end
can map failures to distinct process exit statuses.
"""


class LinfootError(Exception):
    exit_code = 1


class DomainError(LinfootError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""

    exit_code = 2


class ParameterError(LinfootError, ValueError):
    """A tuning parameter is inconsistent with the data (e.g. k >= n)."""

    exit_code = 3


class DegenerateInputError(LinfootError, ValueError):
    """The data cannot support the requested statistic (zero variance etc.)."""

    exit_code = 4


class ConvergenceError(LinfootError, RuntimeError):
    """Adaptive quadrature ran out of subdivisions.

    The best available estimate and its error bound are kept on the
    exception so callers may still inspect them.
    """

    exit_code = 5

    def __init__(self, message, estimate=float("nan"), error=float("inf")):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class TrainingDivergedError(LinfootError, RuntimeError):
    exit_code = 6

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class InputShapeError(LinfootError, ValueError):
    exit_code = 7


class CorruptModelError(LinfootError, ValueError):
    exit_code = 8


class UnsupportedVersionError(CorruptModelError):
    exit_code = 9


class DataFormatError(LinfootError, ValueError):
    """A CSV or interchange file could not be parsed."""

    exit_code = 10
