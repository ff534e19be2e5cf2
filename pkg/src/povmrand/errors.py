"""Exception types shared across the package."""

from __future__ import annotations


class InvalidGeometryError(ValueError):
    """A POVM geometry violates completeness or structural requirements."""


class UnsupportedGeometryError(ValueError):
    """The operation needs structure (uniform facet angle) the geometry lacks."""


class UnphysicalStateError(ValueError):
    """A Bloch vector or density matrix lies outside the physical set."""


class InfeasibleTargetError(ValueError):
    """No quantum state reproduces the requested outcome statistics.

    Carries the constraint residual that proved infeasibility.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = float(residual)


class TimetagParseError(ValueError):
    """Malformed timetag record; carries the offending record index."""

    def __init__(self, message: str, record_index: int):
        super().__init__(message)
        self.record_index = int(record_index)
