"""Exception hierarchy shared by every module."""
from typing import Optional


class SoftLabelError(Exception):
    """Base class for all errors raised by soft_label_loc."""


class InvalidIndexError(SoftLabelError, IndexError):
    """An area index outside 1..n for its grid."""


class EmptyInputError(SoftLabelError, ValueError):
    """An operation received an empty collection where one item is required."""


class InvalidConfigurationError(SoftLabelError, ValueError):
    """A parameter combination that cannot produce a valid result."""

    def __init__(self, message: str, row: Optional[int] = None):
        super().__init__(message)
        self.row = row


class DimensionMismatchError(SoftLabelError, ValueError):
    """Two artifacts or arrays disagree on a dimension."""

    def __init__(self, what: str, expected, actual):
        super().__init__(f"{what}: expected {expected}, got {actual}")
        self.what = what
        self.expected = expected
        self.actual = actual


class NonFiniteError(SoftLabelError, RuntimeError):
    """A NaN or infinity reached an input, a loss or a gradient."""


class ConfigError(SoftLabelError, ValueError):
    """The experiment config file is missing, malformed or invalid."""


class FormatError(SoftLabelError, ValueError):
    """A binary dataset or checkpoint file could not be parsed."""
