"""Exception types shared across the package."""


class SubvecError(Exception):
    """Base class for all package errors."""


class ParseError(SubvecError, ValueError):
    """Malformed input file or stream."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class FormatError(ParseError):
    """Malformed model file."""


class DomainError(SubvecError, ValueError):
    """Argument outside an operation's domain (unknown node, empty subgraph, ...)."""


class InvariantError(SubvecError, RuntimeError):
    """An internal invariant was violated (e.g. non-finite model entries)."""
