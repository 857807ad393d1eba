"""
Custom exceptions for simulation, ingestion and reporting.

Every exception carries an exit code so management commands can map
failures onto the documented process status (1 input, 2 numerical).
"""

from typing import Any, Dict, Optional


class TowerCoverageError(Exception):
    """Base exception for tower coverage errors."""

    exit_code = 1

    def __init__(
        self,
        message: str,
        filename: Optional[str] = None,
        line_number: Optional[int] = None,
    ):
        self.message = message
        self.filename = filename
        self.line_number = line_number
        super().__init__(self.format_message())

    def format_message(self) -> str:
        """Format error message with context."""
        parts = [self.message]
        if self.filename:
            parts.append(f"File: {self.filename}")
        if self.line_number:
            parts.append(f"Line: {self.line_number}")
        return " | ".join(parts)

    def as_dict(self) -> Dict[str, Any]:
        """Machine-readable form used for command error output."""
        return {
            "error": self.__class__.__name__,
            "message": self.message,
            "filename": self.filename,
            "line_number": self.line_number,
            "exit_code": self.exit_code,
        }


class InvalidConfigError(TowerCoverageError):
    """Raised when a configuration object or document is invalid."""

    pass


class MissingRadiusError(InvalidConfigError):
    """Raised when a tower has no coverage radius assigned."""

    def __init__(self, site_id: str, kind: Optional[str] = None):
        self.site_id = site_id
        self.kind = kind
        message = f"No coverage radius assigned to site {site_id}"
        if kind:
            message += f" (kind {kind})"
        super().__init__(message)


class InvalidArgumentError(TowerCoverageError):
    """Raised when an operation receives inconsistent arguments."""

    pass


class OutOfRangeError(InvalidArgumentError):
    """Raised when a value lies outside a model's domain of validity."""

    def __init__(self, message: str, expected: str = None, got: str = None):
        self.expected = expected
        self.got = got
        super().__init__(message)

    def format_message(self) -> str:
        msg = super().format_message()
        if self.expected and self.got:
            msg += f" | Expected: {self.expected}, Got: {self.got}"
        return msg


class InvalidDropError(TowerCoverageError):
    """Raised when a user drop cannot feed the channel generator."""

    pass


class NumericalError(TowerCoverageError):
    """Raised when a numerical routine fails to produce a usable result."""

    exit_code = 2

    def __init__(self, message: str, condition_number: Optional[float] = None):
        self.condition_number = condition_number
        super().__init__(message)

    def format_message(self) -> str:
        msg = super().format_message()
        if self.condition_number is not None:
            msg += f" | Condition: {self.condition_number:.3e}"
        return msg

    def as_dict(self) -> Dict[str, Any]:
        data = super().as_dict()
        data["condition_number"] = self.condition_number
        return data


class DegenerateChannelError(NumericalError):
    """Raised when a user has no useful signal path (zero effective gain)."""

    def __init__(self, user_index: int):
        self.user_index = user_index
        super().__init__(f"Zero effective gain for user {user_index}")


class InputFormatError(TowerCoverageError):
    """Raised when a population raster or tower file cannot be parsed."""

    def __init__(
        self,
        message: str,
        filename: str = None,
        line_number: int = None,
        expected: str = None,
        got: str = None,
    ):
        self.expected = expected
        self.got = got
        super().__init__(message, filename, line_number)

    def format_message(self) -> str:
        """Format error with expected vs actual values."""
        msg = super().format_message()
        if self.expected and self.got:
            msg += f" | Expected: {self.expected}, Got: {self.got}"
        return msg


class IrregularGridError(InputFormatError):
    """Raised when raster cells do not form a complete rectilinear grid."""

    pass


class EmptyCandidateGridError(TowerCoverageError):
    """Raised when tower relocation has nowhere to place a tower."""

    def __init__(self):
        super().__init__("Candidate grid is empty")


class UndefinedPercentageError(TowerCoverageError):
    """Raised when coverage percentages are requested for a zero population."""

    def __init__(self, total_population: float):
        self.total_population = total_population
        super().__init__(
            f"Coverage percentage undefined for total population {total_population}"
        )
