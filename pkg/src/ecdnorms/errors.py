"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when an argument violates a documented precondition."""


class DomainError(InvalidInputError):
    """A scalar function is undefined at some eigenvalue."""

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class UnsupportedError(InvalidInputError):
    """The requested dimension is outside what an oracle supports."""


class InternalError(RuntimeError):
    """A numerical routine failed an internal consistency check."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
