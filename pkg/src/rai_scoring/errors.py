"""Exception hierarchy shared by every module."""

from __future__ import annotations


class RaiError(Exception):
    """Base class for all engine errors."""


class ConfigurationError(RaiError):
    pass


class InputError(RaiError):
    pass


class SchemaError(InputError):
    pass


class ParseError(InputError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class StratificationError(RaiError):
    pass


class TrainingError(RaiError):
    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch


class NumericalError(RaiError):
    def __init__(self, message: str, sample_index: int | None = None):
        super().__init__(message)
        self.sample_index = sample_index


class GroupingError(RaiError):
    pass


class NormalizationError(RaiError):
    pass


class AggregationError(RaiError):
    pass
