"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Array shapes do not match the declared widths."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values."""


class DegenerateDataError(ValueError):
    """Input data violates a structural precondition (zero rows, empty sets)."""


class GridError(ValueError):
    """A quadrature grid is unusable (too small, mismatched axes)."""


class FormatError(ValueError):
    """A serialized file is malformed or has an unsupported version."""


class ConfigError(ValueError):
    """An experiment configuration is invalid."""
