"""Shared exception types.

CLI exit codes map onto these: ValidationError -> 2, ConvergenceError -> 3,
ResourceCapError -> 4.
"""


class ValidationError(ValueError):
    """An input fails a structural or physical requirement."""


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""


class ResourceCapError(RuntimeError):
    """A request exceeds a configured size cap (matrix size, mode count, ...)."""
