"""Exception types shared across the package."""


class LeakwatchError(Exception):
    """Base class for all leakwatch errors."""


class MalformedRow(LeakwatchError):
    """A CSV row could not be parsed; carries the 1-based line number."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class NonMonotoneReading(LeakwatchError):
    """Cumulative meter reading decreased (meter rollback)."""


class DuplicateTimestamp(LeakwatchError):
    """Two samples share the same timestamp."""


class OutOfOrderTimestamp(LeakwatchError):
    """Sample timestamps are not strictly increasing."""


class InsufficientData(LeakwatchError):
    """The sample span is too short for the requested operation."""


class CoverageGap(LeakwatchError):
    """A required sample for a window is missing."""


class IncompleteGroup(LeakwatchError):
    """A sample group contains missing intervals."""


class InsufficientDays(LeakwatchError):
    """Too few observed days for classification."""


class InsufficientSamples(LeakwatchError):
    """Too few observations to compute a critical value (n < 2)."""


class LearningIncomplete(LeakwatchError):
    """The primary learning period has not elapsed."""


class WindowNotInStp(LeakwatchError):
    """Window length is not one of the configured short-time-period lengths."""


class IndexOutOfRange(LeakwatchError):
    """1-based short-time-period index out of bounds."""


class EmptySegments(LeakwatchError):
    """Threshold composition called with no segments."""


class NoOpenAlert(LeakwatchError):
    """A verdict was submitted but no alert is awaiting one."""


class VerdictAlreadyRecorded(LeakwatchError):
    """A second verdict was submitted for an already-judged alert."""


class UndefinedTuning(LeakwatchError):
    """Threshold tuning requested in a state the tuning rule does not define."""


class InterruptedFlow(LeakwatchError):
    """Steady-flow check called on samples that include an interruption."""


class InsufficientCoverage(LeakwatchError):
    """Not enough contiguous samples to cover the requested window."""


class SpanMismatch(LeakwatchError):
    """An injected event lies outside the trace span."""


class ConfigError(LeakwatchError):
    """A configuration file is malformed."""


class SnapshotError(LeakwatchError):
    """A persisted state snapshot cannot be read."""
