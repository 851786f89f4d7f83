"""Exception hierarchy shared across the package."""


class GPDeconvError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(GPDeconvError, ValueError):
    """A kernel/filter parameter is outside its admissible domain."""


class DimensionError(GPDeconvError, ValueError):
    """Input dimensionality is unsupported or inconsistent."""


class UnsupportedOperationError(GPDeconvError):
    """The operation is not defined for the given spec combination."""


class NotPositiveDefiniteError(GPDeconvError):
    """A covariance matrix could not be factorized even with jitter.

    Attributes
    ----------
    pivot : int or None
        Index of the first failing pivot, when the backend reports one.
    jitter : float
        Largest jitter level attempted before giving up.
    """

    def __init__(self, message, pivot=None, jitter=0.0):
        super().__init__(message)
        self.pivot = pivot
        self.jitter = jitter


class TrainingError(GPDeconvError):
    """Hyperparameter optimization failed on every restart."""


class DataFormatError(GPDeconvError, ValueError):
    """A CSV/PGM/JSON payload does not follow the documented format.

    Attributes
    ----------
    line : int or None
        1-based line number of the offending record, when known.
    """

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class ConfigError(GPDeconvError, ValueError):
    """A run configuration failed schema validation."""
