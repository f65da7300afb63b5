"""Exception hierarchy shared across the package."""


class PathintError(Exception):
    """Base class for all errors raised by pathint."""


class ValidationError(PathintError, ValueError):
    """Bad argument, shape, range or configuration value."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class GridMismatchError(ValidationError):
    """Two objects that must share a time grid do not."""


class NumericalError(PathintError, ArithmeticError):
    """A non-finite value was produced (explosion, failed factorization)."""

    def __init__(self, message, index=None):
        super().__init__(message if index is None else f"{message} (at grid index {index})")
        self.index = index
