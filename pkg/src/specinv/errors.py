"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
2 = bad input, 3 = no bound state, 4 = boundary extremum, 5 = divergence,
1 = anything else.
"""

from __future__ import annotations


class SpecInvError(Exception):
    exit_code = 1

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "message": str(self)}


class DomainError(SpecInvError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    exit_code = 2


class RangeError(DomainError):
    """Evaluation outside a tabulated range with extrapolation disabled."""


class UnsupportedModelError(SpecInvError):
    exit_code = 2


class NoBoundStateError(SpecInvError):
    """The requested state does not exist at this coupling."""

    exit_code = 3

    def __init__(self, message: str, *, evidence: dict | None = None):
        super().__init__(message)
        self.evidence = evidence or {}

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["evidence"] = self.evidence
        return d


class NumericalInstabilityError(SpecInvError):
    pass


class UnboundedSearchError(SpecInvError):
    pass


class InvariantViolationError(SpecInvError):
    pass


class BoundaryExtremumError(SpecInvError):
    """A 1-D max/min landed on the edge of its search domain.

    ``points`` holds the offending abscissae (s, r or v values) and
    ``boundary`` the parameter values at which the extremum was pinned;
    ``side`` is ``"low"``, ``"high"`` or ``"both"``.
    """

    exit_code = 4

    def __init__(self, message: str, *, points=(), boundary=(), side: str = "low"):
        super().__init__(message)
        self.points = [float(p) for p in points]
        self.boundary = [float(b) for b in boundary]
        self.side = side

    def to_dict(self) -> dict:
        d = super().to_dict()
        d.update(points=self.points, boundary=self.boundary, side=self.side)
        return d


class BasisUnsuitableError(SpecInvError):
    exit_code = 2


class TangencyError(SpecInvError):
    exit_code = 2


class NoCertificateError(SpecInvError):
    exit_code = 2


class IterateUnsolvableError(SpecInvError):
    exit_code = 3


class DivergenceError(SpecInvError):
    exit_code = 5

    def __init__(self, message: str, *, history=None):
        super().__init__(message)
        self.history = history if history is not None else []

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["history"] = self.history
        return d


class UsageError(DomainError):
    """Malformed command line or configuration file."""
