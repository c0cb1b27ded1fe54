"""
Exception hierarchy shared by the library and the command line.

Each class carries the process exit status ``pairclone.main`` returns for it.
"""


class PairCloneError(Exception):
    """Base class for every error raised on purpose by this package."""

    exit_code = 4


class ConfigError(PairCloneError, ValueError):
    """Unknown config keys, invalid hyperparameters or conflicting options."""

    exit_code = 2


class DataError(PairCloneError, ValueError):
    """Malformed or inconsistent input counts."""

    exit_code = 3


class DimensionError(PairCloneError, ValueError):
    """Array shapes that do not agree with each other."""


class TopologyError(PairCloneError, ValueError):
    """Invalid parent vector, or a tree size beyond the enumeration limit."""


class EstimationError(PairCloneError):
    """No retained draws match the requested model."""


class DiagnosticsError(PairCloneError, ValueError):
    """Traces too short or windows that cannot be compared."""
