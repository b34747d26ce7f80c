"""Exception hierarchy shared across the package.

The command line maps these onto exit codes (see cli.py): configuration
errors exit with 2, data errors with 3, numerical errors with 4.
"""


class GraphCorrError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(GraphCorrError):
    """Invalid or inconsistent configuration values."""


class CompatibilityError(ConfigurationError):
    """Checkpoint contents do not match the model built from the config."""


class DataError(GraphCorrError):
    """Problem with an input dataset, manifest, or subject file."""


class DegenerateSignalError(DataError):
    """A signal row (or its windowed span) has zero variance."""


class InsufficientFramesError(DataError):
    """Windowing parameters leave no complete window."""


class StratificationError(DataError):
    """A cross-validation split cannot be stratified over both classes."""


class NumericalError(GraphCorrError):
    """A numerically undefined result was requested."""


class DegenerateTestError(NumericalError):
    """Signed-rank test invoked on all-zero differences."""


class UndefinedMetricError(NumericalError):
    """Metric undefined for the given inputs (e.g. single-class ROC)."""


class ShapeMismatchError(GraphCorrError):
    """Operands do not conform; the message names both shapes."""


class ContractError(GraphCorrError):
    """An operation was invoked outside its documented contract."""
