"""Exception and warning types raised across the package."""

from __future__ import annotations


class EdgeDynamicsError(Exception):
    """Base class for every error raised by this package."""


class InvalidParam(EdgeDynamicsError, ValueError):
    pass


class InvalidShape(EdgeDynamicsError, ValueError):
    pass


class DimensionError(EdgeDynamicsError, ValueError):
    pass


class CriticalPointError(EdgeDynamicsError, ValueError):
    """The Schwarzian derivative is undefined where f' vanishes."""


class NoRootError(EdgeDynamicsError):
    pass


class InconclusiveError(EdgeDynamicsError):
    pass


class ConstructionFailed(EdgeDynamicsError):
    """Root finding succeeded but the witness inequality did not verify."""


class DivergedError(EdgeDynamicsError):
    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class OrthogonalityError(EdgeDynamicsError):
    pass


class NonConvergedError(EdgeDynamicsError):
    pass


class NoPositiveLabelError(EdgeDynamicsError, ValueError):
    pass


class BracketError(EdgeDynamicsError):
    pass


class ParseError(EdgeDynamicsError):
    """Malformed input file; carries the 1-based line and column."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)
        self.line = line
        self.column = column


class NonPositiveAWarning(UserWarning):
    """Some samples have a_i <= 0, outside the range the phase theory covers."""
