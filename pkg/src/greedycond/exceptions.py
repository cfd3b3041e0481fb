"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the admissible domain of an operation."""


class NumericalError(ArithmeticError):
    """A factorization or solve failed beyond the configured tolerances."""


class ConfigError(ValueError):
    """An experiment configuration is invalid.

    ``key`` names the offending config path (dotted), when known.
    """

    def __init__(self, message, key=None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)
