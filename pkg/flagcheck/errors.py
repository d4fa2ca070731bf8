"""Exception classes for the flagcheck toolkit."""


class FlagCheckError(Exception):
    """Base error for the toolkit"""


class ArgumentError(FlagCheckError, ValueError):
    """Invalid argument: bad index, mismatched dimensions or lengths, failed precondition"""


class InvariantError(ArgumentError):
    """A state, channel, ensemble or flag basis violates its type invariants"""


class CapacityError(FlagCheckError):
    """Product dimension or copy count exceeds the configured cap"""


class CapabilityError(FlagCheckError):
    """Measure cannot evaluate states of this shape"""


class DegenerateError(FlagCheckError):
    """Typical k-range is empty"""


class FormatError(FlagCheckError, ValueError):
    """QSTATE, KRAUS or config text could not be parsed or fails validation"""
