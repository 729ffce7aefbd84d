"""Exception hierarchy.

Data problems derive from :class:`DataError` so the CLI can map them to
exit code 2 in one place.
"""

from __future__ import annotations


class AnisoError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(AnisoError, ValueError):
    """Invalid or contradictory configuration."""


class DomainError(AnisoError, ValueError):
    """Argument outside the domain of a mathematical function."""


class EmptyVector(DomainError):
    pass


class NegativeEntry(DomainError):
    pass


class LengthMismatch(DomainError):
    pass


class NotAProbability(DomainError):
    pass


class NoThreshold(AnisoError, RuntimeError):
    """``predict`` called on a detector configured without tau or contamination."""


class DataError(AnisoError, ValueError):
    """Problem with user-supplied data."""


class EmptySubsample(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class DegenerateLabels(DataError):
    """Labels contain a single class, so AUCROC is undefined."""


class EmptyResults(DataError):
    pass


class ParseError(DataError):
    def __init__(self, row: int, col: int, text: str):
        super().__init__(f"row {row}, column {col}: cannot parse {text!r} as a number")
        self.row = row
        self.col = col


class NonFiniteValue(DataError):
    def __init__(self, row: int, col: int):
        super().__init__(f"row {row}, column {col}: non-finite value")
        self.row = row
        self.col = col


class RaggedRows(DataError):
    pass


class LabelNotBinary(DataError):
    pass


class ModelFileError(DataError):
    pass


class VersionMismatch(ModelFileError):
    pass


class CorruptFile(ModelFileError):
    pass
