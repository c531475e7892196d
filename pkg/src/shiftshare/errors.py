"""Exception hierarchy shared by every module.

The CLI maps the three top-level families onto exit codes 2, 3 and 4.
"""

from __future__ import annotations


class ShiftShareError(Exception):
    """Base class for all package errors."""


class ConfigError(ShiftShareError):
    """Invalid or inconsistent configuration."""


class DataValidationError(ShiftShareError):
    """Input data violates a schema or invariant.

    ``path`` and ``line`` point at the offending record when known.
    """

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if self.path is not None:
            where = self.path if line is None else f"{self.path}:{line}"
            where += ": "
        super().__init__(where + message)


class DegenerateRegionError(DataValidationError):
    """A region has zero total employment where positive employment is required."""


class EstimationError(ShiftShareError):
    """A regression could not be carried out."""


class RankDeficiencyError(EstimationError):
    def __init__(self, message: str, columns=()):
        self.columns = tuple(columns)
        super().__init__(message)


class WeakInstrumentError(EstimationError):
    """First-stage slope is numerically indistinguishable from zero."""


class EmptySampleError(EstimationError):
    def __init__(self, message: str, horizon: int | None = None):
        self.horizon = horizon
        super().__init__(message)
