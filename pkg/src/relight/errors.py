"""Exception types shared across the package."""


class RelightError(Exception):
    """Base class for errors raised by this package."""


class ContractError(RelightError):
    """An input violated a documented precondition or invariant."""


class DecodeError(RelightError):
    """A file could not be decoded; ``offset`` is the byte position."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)


class SolverError(RelightError):
    """The linear solver failed; carries the final relative residual."""

    def __init__(self, message, residual=None, iterations=None):
        self.residual = residual
        self.iterations = iterations
        super().__init__(message)
