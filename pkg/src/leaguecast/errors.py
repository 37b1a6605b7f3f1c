"""Exception types shared across the package."""

from __future__ import annotations


class LeaguecastError(Exception):
    """Base class for all errors raised by leaguecast."""


class DataError(LeaguecastError, ValueError):
    """Malformed or inconsistent match data.

    ``path``, ``line`` and ``column`` are filled in when the problem can be
    pinned to a location in an input file.
    """

    def __init__(self, message: str, *, path=None, line: int | None = None, column: str | None = None):
        self.path = path
        self.line = line
        self.column = column
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class RatingError(LeaguecastError, ValueError):
    """A rating system could not be built or solved."""


class FitError(LeaguecastError, RuntimeError):
    """Ordered-probit fitting failed. ``diagnostics`` holds the optimizer state."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InsufficientHistoryError(LeaguecastError):
    """An experiment asks for seasons that lack the required training history."""

    def __init__(self, message: str, earliest_feasible: int | None = None):
        super().__init__(message)
        self.earliest_feasible = earliest_feasible
