"""Exception taxonomy shared across the package.

Four failure classes: bad configuration input, structurally invalid models,
numerical breakdown at runtime, and plain domain errors on function arguments.
"""


class ConfigError(Exception):
    """Configuration file or CLI arguments are invalid."""


class InvalidModelError(ValueError):
    """A model object violates its structural contract (shapes, PSD, ranges)."""


class NumericalError(ArithmeticError):
    """A computation lost numerical validity (singular matrix, zero normalizer)."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""
