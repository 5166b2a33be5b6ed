"""
Unit tests for the exception hierarchy and exit codes.
"""

import pytest

from bellsim.exceptions import (
    EXIT_INTERNAL,
    EXIT_USAGE,
    BellSimError,
    ConfigurationError,
    DegenerateModelError,
    NoCoincidenceError,
    TheoremViolationError,
    ValidationError,
    exit_code_for,
)


@pytest.mark.unit
class TestExceptions:
    """Test cases for exception classes."""

    def test_context_in_message(self):
        """Test that context is appended to the message."""
        error = BellSimError("bad", context={"key": 1})
        assert str(error) == "bad (context: {'key': 1})"
        assert str(BellSimError("plain")) == "plain"

    def test_validation_fields(self):
        """Test the structured fields of ValidationError."""
        error = ValidationError("n must be >= 1", field="n", value=0, expected=">= 1")
        assert (error.field, error.value, error.expected) == ("n", 0, ">= 1")

    def test_messages(self):
        """Test the formatted messages of domain errors."""
        assert str(DegenerateModelError("no atoms")) == "Degenerate model: no atoms"
        assert "AC'" in str(NoCoincidenceError("AC'", 1000))
        violation = TheoremViolationError("theorem2", -0.01, witness={"weights": [1.0]})
        assert "theorem2" in str(violation)
        assert violation.witness == {"weights": [1.0]}

    def test_hierarchy(self):
        """Test that every domain error derives from BellSimError."""
        for cls in (ValidationError, ConfigurationError, DegenerateModelError):
            assert issubclass(cls, BellSimError)


@pytest.mark.unit
class TestExitCodes:
    """Test cases for exit_code_for."""

    @pytest.mark.parametrize(
        "error, code",
        [
            (ValidationError("x"), EXIT_USAGE),
            (ConfigurationError("x"), EXIT_USAGE),
            (DegenerateModelError("x"), EXIT_USAGE),
            (NoCoincidenceError("AC'", 1), EXIT_USAGE),
            (TheoremViolationError("bounds", -1.0), EXIT_INTERNAL),
            (RuntimeError("x"), EXIT_INTERNAL),
        ],
    )
    def test_mapping(self, error, code):
        """Test the exit code contract."""
        assert exit_code_for(error) == code
