"""
Exception hierarchy shared by the dependence library and the udep CLI.

Each family carries the process exit code the CLI reports for it.
"""


class UdepError(Exception):
    """Base class for every error raised on purpose by this package."""
    exit_code = 1


class ConfigError(UdepError):
    """Invalid experiment or measure configuration."""
    exit_code = 2


class InvalidAlpha(ConfigError):
    """Pruning hyper-parameter outside [1, L-1]."""


class InvalidBudget(ConfigError):
    """Pair budget K outside [1, K_max]."""


class DataError(UdepError):
    """Input data cannot be measured."""
    exit_code = 3


class InvalidInput(DataError):
    """Non-finite or malformed sample values."""


class DegenerateData(DataError):
    """Samples with zero variance (bandwidth would be 0)."""


class InsufficientData(DataError):
    """Too few samples or pairs for the requested estimate."""


class ShapeError(DataError):
    """Misaligned arrays or out-of-range indices."""


class TrialError(DataError):
    """A Monte-Carlo trial failed; the message names the point and trial."""


class OutputError(UdepError):
    """Reading or writing a result file failed."""
    exit_code = 4
