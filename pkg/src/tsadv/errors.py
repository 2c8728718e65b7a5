"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration errors (including bad
argument values raised as ValueError) exit 2, data/file errors exit 3,
numeric errors exit 4.
"""


class ConfigError(ValueError):
    """Invalid configuration: bad field values, inconsistent settings."""


class DataError(Exception):
    """Dataset-level problem: missing files, malformed content."""


class ParseError(DataError):
    """Malformed row or value in a data file; message names the line."""


class SchemaError(DataError):
    """File header does not match the expected column layout."""


class EmptyDatasetError(DataError):
    """An operation that needs at least one instance got none."""


class NumericError(ArithmeticError):
    """Non-finite values where finite ones are required."""
