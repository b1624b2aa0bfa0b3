"""Exception hierarchy shared across the package."""


class DbanditError(Exception):
    """Base class for all package errors."""


class UsageError(DbanditError, ValueError):
    """Caller violated a precondition (shape mismatch, bad index, ...)."""


class InputError(DbanditError, ValueError):
    """Numeric input is malformed, e.g. contains NaN or inf."""


class CapabilityError(DbanditError, NotImplementedError):
    """The requested operation is not available for this object."""


class ConstructionError(DbanditError, ValueError):
    """An object could not be built with the requested properties."""


class ConfigError(DbanditError, ValueError):
    """Experiment configuration failed validation."""


class DivergenceError(DbanditError, FloatingPointError):
    """A run produced non-finite values.

    Attributes
    ----------
    k : int
        Round at which the non-finite value was detected.
    what : str
        Which quantity went non-finite.
    """

    def __init__(self, k, what):
        self.k = k
        self.what = what
        super().__init__(f"non-finite {what} at round {k}")
