"""Exception taxonomy shared across the package.

The CLI maps these onto process exit codes (usage 1, data 2, capacity 3);
the HTTP layer maps them onto status codes.
"""


class SlimboardError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(SlimboardError):
    """Malformed input data (carries a 1-based line number when known)."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(SlimboardError):
    """A value or argument violates a documented contract."""


class DimensionError(SlimboardError):
    """Operands describe incompatible user/item spaces."""


class CapacityError(SlimboardError):
    """The requested computation would exceed the configured memory budget."""


class ConflictError(SlimboardError):
    """A session operation arrived in the wrong phase or order."""


class NotFoundError(SlimboardError):
    """An unknown session or item id."""
