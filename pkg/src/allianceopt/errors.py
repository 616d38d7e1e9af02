"""Exception types shared across the package; each carries the CLI exit code."""


class AllianceOptError(Exception):
    """Base class for package errors."""

    exit_code = 1


class ConfigError(AllianceOptError):
    """Invalid configuration value or parameter outside its domain."""

    exit_code = 2


class DataError(AllianceOptError):
    """Malformed input data or a graph-domain violation."""

    exit_code = 3


class SizeCapError(AllianceOptError):
    """Instance exceeds the hard size cap of an exhaustive routine."""

    exit_code = 4
