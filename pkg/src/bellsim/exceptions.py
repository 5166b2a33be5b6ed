"""
Exception classes for bellsim.

This module defines the exception hierarchy used throughout the package and
the mapping from exceptions to command-line exit codes.
"""

from typing import Any, Dict, Optional


class BellSimError(Exception):
    """Base exception for all bellsim errors."""

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.context = context or {}

    def __str__(self) -> str:
        if self.context:
            return f"{self.message} (context: {self.context})"
        return self.message


class ValidationError(BellSimError):
    """Raised when an argument violates an operation's precondition."""

    def __init__(
        self,
        message: str,
        field: Optional[str] = None,
        value: Optional[Any] = None,
        expected: Optional[str] = None,
        context: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message, context)
        self.field = field
        self.value = value
        self.expected = expected


class ConfigurationError(BellSimError):
    """Raised when configuration is invalid or missing."""

    def __init__(
        self,
        message: str,
        config_key: Optional[str] = None,
        context: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message, context)
        self.config_key = config_key


class DegenerateModelError(BellSimError):
    """Raised when a piecewise pattern or finite model is malformed."""

    def __init__(self, reason: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(f"Degenerate model: {reason}", context)
        self.reason = reason


class NoCoincidenceError(BellSimError):
    """Raised when a statistic needs coincidences but a pair produced none."""

    def __init__(
        self,
        pair_label: str,
        n_total: int,
        context: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(
            f"Pair {pair_label} produced no coincidences in {n_total} trials",
            context,
        )
        self.pair_label = pair_label
        self.n_total = n_total


class TheoremViolationError(BellSimError):
    """Raised when an inequality check fails on a model.

    The inequalities are theorems, so a failure points at the implementation.
    """

    def __init__(
        self,
        check: str,
        margin: float,
        witness: Optional[Dict[str, Any]] = None,
        context: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(f"Check '{check}' failed with margin {margin:.3e}", context)
        self.check = check
        self.margin = margin
        self.witness = witness


# Exit codes of the command-line front end
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INTERNAL = 2

EXIT_CODE_MAP = {
    ValidationError: EXIT_USAGE,
    ConfigurationError: EXIT_USAGE,
    DegenerateModelError: EXIT_USAGE,
    NoCoincidenceError: EXIT_USAGE,
    TheoremViolationError: EXIT_INTERNAL,
}


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI exit code contract."""
    for exception_class, code in EXIT_CODE_MAP.items():
        if isinstance(exc, exception_class):
            return code
    return EXIT_INTERNAL
