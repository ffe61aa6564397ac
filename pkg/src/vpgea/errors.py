"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit with 2,
numeric failures with 3, capacity refusals with 4.
"""


class ConfigError(ValueError):
    """Invalid world, hyperparameter or training configuration."""


class GenerationError(RuntimeError):
    """No task can be generated for the given world."""


class InvalidActionError(ValueError):
    pass


class NumericError(ArithmeticError):
    """Non-finite value where a finite one is required."""


class CapacityError(RuntimeError):
    """Enumeration would exceed the configured trajectory cap."""


class SupportError(ValueError):
    """A sampling distribution misses part of the required support."""
