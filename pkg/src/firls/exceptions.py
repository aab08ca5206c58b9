"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2,
NumericalBreakdownError -> 3, I/O failures (OSError) -> 4.
"""


class FirlsError(Exception):
    """Base class for all package errors."""


class ConfigError(FirlsError, ValueError):
    """Invalid configuration or rejected input (dimension mismatch etc.)."""


class NumericalBreakdownError(FirlsError, RuntimeError):
    """Non-finite values encountered mid-solve.

    Carries the last finite iterate and, when available, the partial
    solve report so callers can inspect how far the run got.
    """

    def __init__(self, message, last_iterate=None, report=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.report = report


class SingularFactorError(FirlsError, RuntimeError):
    """A triangular factor has a non-positive or zero pivot."""


class UndefinedMetricError(FirlsError, ValueError):
    """Metric is undefined for the given inputs (e.g. zero variance)."""
