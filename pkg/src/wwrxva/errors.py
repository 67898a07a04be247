"""Exception hierarchy shared by every module."""


class WwrError(Exception):
    """Base class for all package errors."""


class DomainError(WwrError, ValueError):
    """Argument outside the mathematical domain of a function."""


class InputError(WwrError, ValueError):
    """Malformed or inconsistent user input."""


class CalibrationError(WwrError):
    """A curve or parameter could not be calibrated to market data."""


class InconsistentMomentsError(WwrError, ValueError):
    """Moment inputs imply a materially negative variance."""


class DataError(WwrError):
    """A snapshot or history file is unreadable or fails validation."""
