"""Solvability and solutions of Vekua-type operators on the torus."""

from __future__ import annotations

from .errors import (
    ConditionError,
    DomainError,
    IncompatibilityError,
    ResourceError,
    SmallDivisorError,
    VekuaError,
)

__all__ = [
    "ConditionError",
    "DomainError",
    "IncompatibilityError",
    "ResourceError",
    "SmallDivisorError",
    "VekuaError",
]
