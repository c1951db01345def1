"""Exception types shared across the pipeline stages."""

from __future__ import annotations


class RelexError(Exception):
    """Base class for all pipeline errors."""


class DataError(RelexError):
    """Malformed or inconsistent input data.

    Carries the offending file and line when known so the CLI can report
    them (and exit with the data-error code).
    """

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f" [{path}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + where)


class NoMainEntityError(RelexError):
    """The URL map has no main entity for the requested page."""


class TreeError(DataError):
    """A sentence's head links do not form a rooted tree."""


class ConvergenceError(RelexError):
    """Optimizer failed to reach the required gradient tolerance."""

    def __init__(self, message: str, grad_norm: float):
        self.grad_norm = grad_norm
        super().__init__(f"{message} (gradient norm {grad_norm:.3e})")
