"""Exception hierarchy shared by every module."""

from __future__ import annotations


class MapfError(Exception):
    """Base class for all errors raised by :mod:`mapfot`."""


class CapacityExceeded(MapfError):
    """A generator cannot place all obstacles, robots and targets distinctly."""


class ParseError(MapfError):
    """An instance or plan file is malformed.

    ``field`` names the offending JSON field when known, ``line`` the
    1-based line of the JSON decoder error when the document is not JSON.
    """

    def __init__(self, message: str, *, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if field is not None:
            where.append(f"field {field!r}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class VersionMismatch(MapfError):
    """A file declares a schema version this library does not understand."""


class HorizonZeroWithUnreachedTargets(MapfError):
    """A zero horizon was requested while robots do not already sit on targets."""


class DimensionMismatch(MapfError):
    """A plan or flow vector does not fit the instance / network it is paired with."""


class NonIntegralFlow(MapfError):
    """A flow handed to plan reconstruction carries fractional values."""


class ConservationViolation(MapfError):
    """A flow violates node balance or arc capacity on the time-expanded network."""


class Infeasible(MapfError):
    """No plan routes every robot to a target within the horizon."""


class NonPositiveEpsilon(MapfError):
    """The entropic temperature must be strictly positive."""


class Diverged(MapfError):
    """Sinkhorn scalings became non-finite."""


class TensorTooLarge(MapfError):
    """The explicit path-space tensor would exceed the materialisation budget."""


class SupportMismatch(MapfError):
    """A transport slice carries mass outside the kernel support."""


class BudgetExceeded(MapfError):
    """An oracle call exceeds its enumeration budget."""
