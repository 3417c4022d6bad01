"""
Exception and warning types shared across the package.
"""

from typing import Optional


class RobustMCError(Exception):
    """Base class for all package errors."""


class DimensionError(RobustMCError, ValueError):
    """Shapes or indices do not match the problem dimensions."""


class ArgumentError(RobustMCError, ValueError):
    """An argument is outside its admissible range."""


class NumericError(RobustMCError, ArithmeticError):
    """A computation produced non-finite values or failed to converge."""

    def __init__(self, message: str, iteration: Optional[int] = None):
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


class RatingsParseError(ArgumentError):
    """A ratings file line could not be parsed."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class AssumptionWarning(UserWarning):
    """A theoretical assumption (e.g. kappa <= eta) is violated."""


class DataWarning(UserWarning):
    """Input data was accepted but looks suspicious."""


class ConfigWarning(UserWarning):
    """Two settings disagree and one of them wins."""
