"""
Error types.
Two families: validation failures (bad inputs or configuration, exit code 2)
and numerical failures (a computation could not reach its contract, exit code 3).
"""

from typing import Any, Optional


class LosawError(Exception):
    exit_code = 1


class ValidationFailure(LosawError, ValueError):
    exit_code = 2


class NumericalFailure(LosawError, ArithmeticError):
    exit_code = 3


# ─────────────────────────────────────────────────────────────────
# Validation
# ─────────────────────────────────────────────────────────────────

class InfeasibleThresholdError(ValidationFailure):
    pass


class InvalidPropensityError(ValidationFailure):
    pass


class SchemaMismatchError(ValidationFailure):
    pass


class ConfigError(ValidationFailure):
    pass


class GridTooLargeError(ValidationFailure):
    pass


# ─────────────────────────────────────────────────────────────────
# Numerical
# ─────────────────────────────────────────────────────────────────

class DegenerateWeightsError(NumericalFailure):
    pass


class DegenerateVarianceError(NumericalFailure):
    pass


class NotPositiveDefiniteError(NumericalFailure):
    pass


class NoSplitsError(NumericalFailure):
    pass


class SearchNotConvergedError(NumericalFailure):
    """Threshold bisection ran out of steps; `best` is the closest iterate."""

    def __init__(self, message: str, best: Any = None, gap: Optional[float] = None):
        super().__init__(message)
        self.best = best
        self.gap = gap


class SolverNotConvergedError(NumericalFailure):
    """Joint-distribution solver hit its iteration cap."""

    def __init__(self, message: str, report: Optional[dict[str, float]] = None):
        super().__init__(message)
        self.report = report or {}


# Raised inside fitting and turned into uniform weights by the caller.

class ConstantFeatureError(NumericalFailure):
    pass


class DegenerateConditionalError(NumericalFailure):
    pass
