"""Exception hierarchy shared across the package."""


class SnapregError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SnapregError, ValueError):
    """Input violates a documented precondition (shape, finiteness, symmetry...)."""


class NumericalError(SnapregError, ArithmeticError):
    """An underlying factorization failed to converge."""


class PreconditionError(SnapregError, ValueError):
    """An analysis was requested outside the hypotheses it is valid for."""


class ConfigError(SnapregError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ParseError(SnapregError, ValueError):
    """Malformed data file. ``row`` and ``column`` are 1-based when known."""

    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        loc = ""
        if row is not None:
            loc = f" (row {row}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.row = row
        self.column = column
