"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of a function or frame."""


class ConvergenceError(RuntimeError):
    """An iterative solver stopped without meeting its tolerance."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class DegeneratePredictorError(ArithmeticError):
    """The predictor normaliser is zero (alpha == 1 with no usable data)."""


class ConfigError(ValueError):
    """A run configuration is malformed or names an unknown key."""


class DataError(DomainError):
    """Input data violate the frame support; ``row`` is 1-based when known."""

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row
