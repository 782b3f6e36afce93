"""Exception types raised across the pipeline."""
from __future__ import annotations


class GoUnsafeError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(GoUnsafeError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class OrphanUsage(GoUnsafeError):
    """A usage site lies outside every function, type and global variable."""


class UnsupportedContext(GoUnsafeError):
    pass


class UnknownFiniteLabel(GoUnsafeError):
    pass


class ShapeMismatch(GoUnsafeError):
    pass


class NonScalarLoss(GoUnsafeError):
    pass


class BudgetExceeded(GoUnsafeError):
    pass


class EmptyGraph(GoUnsafeError):
    pass


class VocabularyMismatch(GoUnsafeError):
    pass


class Diverged(GoUnsafeError):
    def __init__(self, epoch: int):
        super().__init__(f"loss became NaN at epoch {epoch}")
        self.epoch = epoch


class TooFewInstances(GoUnsafeError):
    pass


class LabelOutOfRange(GoUnsafeError):
    pass


class EmptyCalibration(GoUnsafeError):
    pass


class LengthMismatch(GoUnsafeError):
    pass


class DatasetValidationError(GoUnsafeError):
    pass


class DataLeak(GoUnsafeError):
    """Test-fold instances reached vocabulary building, tuning, training or calibration."""
