"""Exception types shared across the package.

The CLI maps these onto stable exit codes: ConfigError -> 2,
DataError -> 3, TrainingDivergence -> 4.
"""


class SredError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(SredError):
    """Invalid configuration file, key, or parameter value."""


class DataError(SredError):
    """Missing, malformed, or dimensionally inconsistent input data."""


class FormatError(DataError):
    """A file exists but violates the expected on-disk format."""


class TrainingDivergence(SredError):
    """Loss became non-finite during optimization."""
