"""Exception taxonomy shared across the package.

CLI exit codes map onto these: UsageError -> 1, DataError -> 2,
NumericError -> 3.
"""


class UisalError(Exception):
    """Base class for all package errors."""


class ShapeError(UisalError, ValueError):
    """Tensor or layer shapes are incompatible."""


class ConfigError(UisalError, ValueError):
    """A configuration value is out of its legal range."""


class DataError(UisalError, ValueError):
    """Input data violates a documented contract (manifest, vectors, ...)."""


class InsufficientDataError(DataError):
    """Too few samples to fit (e.g. fewer than 8 calibration points)."""


class DegenerateCalibrationError(DataError):
    """Calibration design matrix is rank deficient."""


class EmptyFixationError(DataError):
    """A fixation set with zero points cannot produce a saliency map."""


class UndefinedMetricError(DataError):
    """A metric is undefined for this input (e.g. AUC with no negatives)."""


class NotFittedError(UisalError, RuntimeError):
    """An estimator method requiring a fit was called before fit."""


class NumericError(UisalError, ArithmeticError):
    """A numeric computation produced non-finite values or failed a check."""


class UsageError(UisalError, ValueError):
    """Bad command-line usage."""
