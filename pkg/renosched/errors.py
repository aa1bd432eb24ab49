"""
Exception hierarchy and process exit codes
"""

from enum import IntEnum


class ExitCode(IntEnum):
    """Process exit codes of the command-line tool."""

    OK = 0
    USAGE = 1
    DATA = 2
    INFEASIBLE = 3


class RenoschedError(Exception):
    """Base class for all errors raised by renosched."""

    exit_code: ExitCode = ExitCode.DATA


class ParseError(RenoschedError):
    """Malformed TNTP input."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class DataError(RenoschedError):
    """Inconsistent data: unknown links, unreachable OD pairs, missing cache entries."""


class InfeasibleError(RenoschedError):
    """A schedule or instance that cannot be made feasible."""

    exit_code = ExitCode.INFEASIBLE


class SurrogateError(RenoschedError):
    """A surrogate model that cannot be fitted on the available data."""
