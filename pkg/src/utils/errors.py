"""
Exception hierarchy for the LDLR/SDA toolkit.

Every error raised on purpose by the library derives from LdlrSdaError so that
the suite driver can turn it into a failed check instead of a crash.
"""
from typing import Any, Dict, Optional


class LdlrSdaError(Exception):
    """Base class for all library errors."""


class DimensionMismatchError(LdlrSdaError):
    pass


class PreconditionError(LdlrSdaError):
    """A documented precondition does not hold; `subject` names the offending quantity."""

    def __init__(self, message: str, subject: Optional[str] = None):
        super().__init__(message)
        self.subject = subject


class FixedCoordinateError(PreconditionError):
    pass


class StateCapExceededError(LdlrSdaError):
    def __init__(self, states: int, cap: int):
        super().__init__(f"{states} states exceed the cap of {cap}")
        self.states = states
        self.cap = cap


class BinomialOverflowError(LdlrSdaError):
    pass


class UnsupportedBackendError(LdlrSdaError):
    pass


class PriorModeError(LdlrSdaError):
    pass


class NonStationaryOperatorError(PreconditionError):
    pass


class DefectiveOperatorError(LdlrSdaError):
    pass


class InfeasibleSizeError(LdlrSdaError):
    pass


class RejectionBudgetError(LdlrSdaError):
    def __init__(self, message: str, stats: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.stats = stats or {}


class QueryRangeError(LdlrSdaError):
    pass


class ToleranceViolationError(LdlrSdaError):
    pass


class QueryCapExceededError(LdlrSdaError):
    pass


class SpecFormatError(LdlrSdaError):
    pass


class UnknownSuiteError(LdlrSdaError):
    pass
