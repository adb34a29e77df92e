"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DependencyError -> 3,
ValidationError and ProviderError -> 4.
"""


class AfindexError(Exception):
    """Base class for all package errors."""


class ValidationError(AfindexError):
    """Input data violates a documented contract (bad weight, duplicate key, ...)."""


class ConfigError(AfindexError):
    """Project configuration is malformed or out of domain."""


class DependencyError(AfindexError):
    """An upstream pipeline artifact is missing.

    Carries the name of the command that produces the artifact so the CLI
    can tell the user what to run first.
    """

    def __init__(self, message: str, required_command: str | None = None):
        super().__init__(message)
        self.required_command = required_command


class ProviderError(AfindexError):
    """An embedding provider failed (transport error or malformed reply)."""
