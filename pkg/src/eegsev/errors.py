"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
anything else -> 3.
"""


class ConfigError(ValueError):
    """Invalid configuration or usage (bad flag, bad band edges, ...)."""


class DataError(ValueError):
    """Invalid or insufficient input data (too short, out of range, ...)."""


class FormatError(DataError):
    """A binary file failed magic/version/length validation."""
