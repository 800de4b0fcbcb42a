"""Exception hierarchy shared by every layer of the package."""


class QFAError(Exception):
    """Base class for all package errors."""


class ParameterError(QFAError, ValueError):
    """A physical or configuration parameter is out of its allowed range."""


class DomainError(QFAError, ValueError):
    """An operation was applied outside its mathematical domain."""


class NumericError(QFAError, ArithmeticError):
    """An iterative routine failed to converge.

    Attributes
    ----------
    best : object
        Best iterate reached before giving up.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class PoleEvaluationError(QFAError, ZeroDivisionError):
    """A rational function was evaluated at (or numerically on) a pole."""

    def __init__(self, message, s=None):
        super().__init__(message)
        self.s = s


class DegeneracyError(QFAError, ZeroDivisionError):
    """A feedback denominator vanished identically (or at the requested point)."""


class RangeError(QFAError, ValueError):
    """A requested feature (e.g. a gain drop) does not occur inside the sampled range."""


class ExperimentError(QFAError, RuntimeError):
    """A Monte Carlo experiment could not produce any usable sample."""


class ConfigError(QFAError, ValueError):
    """A run configuration failed schema validation."""
