"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, ParseError and
DataError exit 2, SolverError exit 3.
"""

from __future__ import annotations


class RoadworksError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(RoadworksError):
    """Malformed input file. Carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DataError(RoadworksError):
    """Structurally valid input that violates a domain constraint."""


class SolverError(RoadworksError):
    """The assignment solver cannot produce a solution (e.g. disconnected demand)."""
