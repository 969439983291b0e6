"""Exception types shared across the package."""


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class NotPositiveDefiniteError(ArithmeticError):
    """Cholesky hit a non-positive pivot."""


class ConvergenceError(RuntimeError):
    """An iterative solver exceeded its iteration cap."""
