"""Exception hierarchy shared across the package."""

from __future__ import annotations


class WindbidError(Exception):
    """Base class for all errors raised by this package."""


class SeriesError(WindbidError):
    """Malformed or incompatible time series (empty series, alignment, no overlap)."""


class SchemaError(WindbidError):
    """Dataset file does not match the declared schema."""


class CsvParseError(WindbidError):
    """Unparseable cell or timestamp; carries the offending row number."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class OrderingError(WindbidError):
    """Timestamps in a data file are not strictly increasing."""


class PriceError(WindbidError):
    """Non-finite price fed into settlement arithmetic."""


class SolverError(WindbidError):
    """LP solve failed (infeasible, unbounded, or iteration limit)."""


class FitError(WindbidError):
    """Model fit is ill-posed (uninformative forecast, degenerate costs)."""
