"""Exception types shared across the package.

Each maps to a CLI exit code (see :mod:`pnq.cli`).
"""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class CapacityError(RuntimeError):
    """A configured size or memory guard would be exceeded."""


class IdentityError(AssertionError):
    """An exact identity or proven inequality failed numerically."""


class StateError(RuntimeError):
    """A required precomputed structure is missing."""
