"""Exception types.  The CLI maps them onto exit codes."""
from __future__ import annotations



class EffboundError(Exception):
    exit_code = 1

    def __init__(self, msg: str = "", diagnostics: dict | None = None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class GridError(EffboundError, ValueError):
    """Grid mismatch, bad grid, or a grid too coarse for the requested accuracy."""


class UsageError(EffboundError, ValueError):
    exit_code = 1


class AssumptionError(EffboundError):
    """A model assumption fails (e.g. the decay exponent is at least 1/2)."""

    exit_code = 2


class RangeError(EffboundError):
    """The functional is not in the range of the adjoint score operator."""

    exit_code = 2


class VerificationError(EffboundError):
    exit_code = 3
