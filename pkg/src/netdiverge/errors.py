"""Exception hierarchy.

Two families matter to callers: :class:`ConfigError` for bad parameters or
configuration, and :class:`DataError` for inputs that violate a documented
contract. The CLI maps them to exit codes 2 and 3 respectively.

An infinite divergence is *not* an error anywhere in this package: it is a
legitimate detection outcome and is returned as ``math.inf``.
"""


class NetdivergeError(Exception):
    """Base class for all package errors."""


class ConfigError(NetdivergeError):
    """Invalid parameter, flag, or configuration file."""


class DataError(NetdivergeError):
    """Input data violates a documented contract."""


# --- trace ingestion and transforms ---


class MalformedRow(DataError):
    """A trace file row cannot be parsed; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class NegativeValue(DataError):
    """Traffic volumes must be non-negative."""


class EmptyFile(DataError):
    """Trace file contains no data rows."""


class EmptySegment(DataError):
    """No sample falls inside the requested time-of-day interval."""


class TraceTooShort(DataError):
    """Trace does not yield even one bucket or detection window."""


# --- quantization ---


class DegenerateTrace(DataError):
    """Fewer than two distinct values; no alphabet can be built."""


class InvalidRange(ConfigError):
    """Uniform alphabet bounds are not an increasing pair."""


# --- empirical measures ---


class EmptySequence(DataError):
    """Symbol sequence is empty."""


class SequenceTooShort(DataError):
    """Symbol sequence has fewer than two symbols (no transitions)."""


class SymbolOutOfRange(DataError):
    """Symbol id outside 0..K-1."""


class SupportMismatch(DataError):
    """Measures have different support sizes."""


class DimensionMismatch(DataError):
    """Matrix or vector dimensions do not agree."""


class NotStochastic(DataError):
    """Transition matrix rows do not sum to one (or have negative entries)."""


# --- detectors ---


class InsufficientTraining(DataError):
    """Training trace too short for the configured alphabet size."""


class InvalidBeta(ConfigError):
    """Target false-alarm probability outside (0, 1]."""


class WindowLengthMismatch(DataError):
    """Detection window length differs from the reference window length."""


# --- spatio-temporal ---


class NoOverlap(DataError):
    """Member streams share no aligned timestamps."""


class StreamMismatch(DataError):
    """A required (node_id, role) stream is missing or ambiguous."""


class JointAlphabetTooLarge(ConfigError):
    """Product alphabet would exceed the configured maximum size."""


# --- synthetic generation ---


class InvalidPmf(DataError):
    """Probability vector is negative or does not sum to one."""


class IntervalOutOfRange(DataError):
    """Anomaly interval lies outside the trace span."""


class OverlappingAnomalies(DataError):
    """Two anomaly intervals overlap on the same stream."""


# --- evaluation ---


class SpanMismatch(DataError):
    """Reports and labels do not cover a common time span."""


class EmptyGrid(DataError):
    """Threshold grid for the ROC sweep is empty."""
