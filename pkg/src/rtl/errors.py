"""
Exception hierarchy for the representation transfer toolkit

Three families map onto CLI exit codes: configuration (2), data (3) and
numeric failures (4).
"""

from typing import Optional


class RTLError(Exception):
    """Base class for every error raised by the toolkit"""

    exit_code = 1


# Configuration errors

class ConfigError(RTLError):
    """Invalid configuration, optionally carrying file/line context"""

    exit_code = 2

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{location}{message}")


class UnknownSubcommand(ConfigError):
    pass


class InvalidLevel(ConfigError, ValueError):
    pass


class InvalidFractions(ConfigError, ValueError):
    pass


class InvalidAlpha(ConfigError, ValueError):
    pass


class UnsupportedDims(ConfigError):
    pass


# Data errors

class DataError(RTLError):
    exit_code = 3


class DimensionMismatch(DataError, ValueError):
    pass


class InsufficientData(DataError):
    pass


class MissingColumn(DataError):
    def __init__(self, column: str, path: Optional[str] = None):
        self.column = column
        where = f" in {path}" if path else ""
        super().__init__(f"Missing column '{column}'{where}")


class ParseError(DataError):
    def __init__(self, row: int, column: str, value: str, path: Optional[str] = None):
        self.row = row
        self.column = column
        where = f"{path}: " if path else ""
        super().__init__(f"{where}cannot parse {value!r} as a number (row {row}, column '{column}')")


class EmptyFile(DataError):
    pass


# Numeric errors

class NumericError(RTLError):
    exit_code = 4


class SingularSystem(NumericError):
    pass


class NotSymmetric(NumericError):
    pass


class RankDeficient(NumericError):
    pass


class NonpositiveVariance(NumericError):
    pass


class NegativeStandardError(NumericError, ValueError):
    pass
