"""Exception types shared across the package."""


class CompactPFError(Exception):
    """Base class for all package errors."""


class ParseError(CompactPFError):
    """Malformed input text. Carries a line number when one is known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(CompactPFError):
    """Structurally parseable input that violates a model invariant."""


class ConvergenceError(CompactPFError):
    """An iterative solver exhausted its budget without converging."""
