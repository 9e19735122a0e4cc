"""Exception types raised across the package."""

from __future__ import annotations


class VekuaError(Exception):
    """Base class for all package errors."""


class DomainError(VekuaError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ResourceError(VekuaError, RuntimeError):
    """A scan or enumeration would exceed its configured cap."""


class IncompatibilityError(VekuaError):
    """Pu = f has no solution because f violates a compatibility condition.

    ``certificates`` lists the offending modes (see ``constcoef.Certificate``).
    """

    def __init__(self, message: str, certificates=()):
        super().__init__(message)
        self.certificates = list(certificates)


class ConditionError(VekuaError):
    """An operator fails a structural condition required by a solver."""


class SmallDivisorError(VekuaError):
    """A per-mode denominator is too close to zero to divide by."""

    def __init__(self, message: str, frequencies=()):
        super().__init__(message)
        self.frequencies = [tuple(int(v) for v in xi) for xi in frequencies]
