"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, NumericError and its
subclasses -> 3.
"""


class DeeplinError(Exception):
    """Base class for package-specific failures."""


class ConfigError(DeeplinError, ValueError):
    """Invalid configuration, CLI argument, or file format."""


class NumericError(DeeplinError, RuntimeError):
    """A numeric routine failed beyond recoverable tolerance."""


class SingularInputError(NumericError):
    """Input is singular (or nearly so) where an invertible matrix is required."""


class NoRealRootError(NumericError):
    """An orthogonal factor has an eigenvalue at -1, so no real principal root exists."""
