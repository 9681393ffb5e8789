"""Exception hierarchy shared by every module of the lab."""

from __future__ import annotations


class LabError(ValueError):
    """Base class; anything raised on purpose by this package derives from it."""


class DimensionError(LabError):
    pass


class InvalidBaseError(LabError):
    pass


class InvalidScaleError(LabError):
    pass


class OverlapError(LabError):
    """End-prompt segment would overlap the context segment (a + b > L)."""


class CapacityError(LabError):
    pass


class EmptySequenceError(LabError):
    pass


class GapConditionError(LabError):
    """L - a - b < max(a, b): the intermediate region is not a single interval."""


class UndefinedFrequencyError(LabError):
    pass


class UnsupportedOrderError(LabError):
    pass


class TokenRangeError(LabError):
    pass


class PositionOrderError(LabError):
    pass


class NumericOverflowError(ArithmeticError):
    def __init__(self, where: str):
        super().__init__(f"non-finite values in {where}")
        self.where = where


class DivergenceError(ArithmeticError):
    pass


class ParseError(LabError):
    def __init__(self, lineno: int, reason: str):
        super().__init__(f"line {lineno}: {reason}")
        self.lineno = lineno


class ValidationError(LabError):
    pass


class GroupingError(LabError):
    pass


class RangeError(LabError):
    pass


class PositionStreamExhausted(LabError):
    pass


class TaskMismatchError(LabError):
    pass


class ConfigError(LabError):
    pass
