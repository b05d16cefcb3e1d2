"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration/data problems exit 2,
numerical failures exit 3.
"""


class OUFieldError(Exception):
    """Base class for all package errors."""


class ConfigError(OUFieldError):
    """Invalid configuration: bad grid spec, missing file, bad hyperparameter."""


class DataError(OUFieldError):
    """Malformed or inconsistent input data (rasters, CSVs, observations)."""


class StabilityError(OUFieldError):
    """Operator fails the stability requirements (eigenvalue with nonpositive
    real part, singular factorization)."""


class NumericalError(OUFieldError):
    """A numerical routine produced a result outside its guaranteed tolerance."""


class UnsupportedSizeError(OUFieldError):
    """A dense-only code path was requested above the dense size threshold."""
