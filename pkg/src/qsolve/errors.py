"""Exception hierarchy shared by all modules."""
from __future__ import annotations


class QsolveError(Exception):
    """Base class for every error raised by the solver."""


class SortError(QsolveError):
    """An operation was applied to operands of the wrong sort."""


class NotApplicable(QsolveError):
    """A routine does not apply to its input; the caller has a fallback."""


class UnsupportedFeature(QsolveError):
    """Input uses a construct outside the supported fragment."""


class ParseError(QsolveError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        self.message = message
        super().__init__(f"{line}:{col}: {message}" if line else message)


class ResourceLimit(QsolveError):
    """A configured budget was exhausted before a verdict was reached."""


class InvariantViolation(QsolveError):
    """A runtime self-check failed; this is always a bug."""


def check(condition: bool, message: str) -> None:
    if not condition:
        raise InvariantViolation(message)
