"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericalError -> 4.
"""


class DepgofError(Exception):
    """Base class for all errors raised by depgof."""


class ParameterError(DepgofError, ValueError):
    """A parameter is outside its mathematical domain."""


class DataError(DepgofError):
    """Input data is malformed or insufficient for the request."""


class ConfigError(DepgofError):
    """A pipeline configuration is missing keys or violates bounds."""


class NumericalError(DepgofError):
    """A numerical procedure failed (indefinite kernel, failed factorization)."""
