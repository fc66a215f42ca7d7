"""Exception types shared across the package.

The CLI maps ConfigError to exit code 2 and NumericalError to exit code 3.
"""


class DomainError(ValueError):
    """An argument is outside the mathematical domain of an operation."""


class UnboundedWeightError(DomainError):
    """The weight equation has no finite root (accuracy 0)."""

    def __init__(self, message, set_index=None):
        super().__init__(message)
        self.set_index = set_index


class ConfigError(ValueError):
    """An experiment configuration is malformed or infeasible."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (no convergence, bad conditioning)."""


class FactorizationError(NumericalError):
    """A matrix factorization failed (e.g. rank-deficient Gram matrix)."""
