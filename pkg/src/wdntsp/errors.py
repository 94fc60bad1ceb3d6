"""Exception hierarchy shared by all modules."""


class WdnError(Exception):
    """Base class for every error raised by this package."""


class ParseError(WdnError):
    """Malformed input text. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class StructuralError(WdnError):
    """Network or complex violates a structural invariant."""


class NumericalError(WdnError):
    """An iterative method failed to converge or produced non-finite values."""

    def __init__(self, message, residual=None, trace=None):
        self.residual = residual
        self.trace = trace
        super().__init__(message)


class RecoveryError(WdnError):
    """A reconstruction operator is singular or too ill-conditioned."""


class FormatError(WdnError):
    """A table or export file does not have the expected layout."""
