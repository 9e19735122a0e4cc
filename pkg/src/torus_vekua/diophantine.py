"""Finite continued-fraction surrogates for irrational numbers."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction

from .errors import DomainError, ResourceError

MAX_DEPTH = 30
# bit budget for a single partial quotient b**(k!)
MAX_QUOTIENT_BITS = 1 << 22


@dataclass(frozen=True)
class DiophantineNumber:
    """``[a_0; a_1, ..., a_d]`` with exact integer convergents."""

    quotients: tuple[int, ...]
    label: str = ""

    def __post_init__(self):
        if not self.quotients:
            raise DomainError("a continued fraction needs at least a_0")
        if any(a < 1 for a in self.quotients[1:]):
            raise DomainError("partial quotients a_k must be >= 1 for k >= 1")

    def convergents(self) -> list[tuple[int, int]]:
        """``(p_k, q_k)`` by the standard three-term recurrence."""
        p_prev, p = 1, self.quotients[0]
        q_prev, q = 0, 1
        out = [(p, q)]
        for a in self.quotients[1:]:
            p_prev, p = p, a * p + p_prev
            q_prev, q = q, a * q + q_prev
            out.append((p, q))
        return out

    def as_fraction(self) -> Fraction:
        p, q = self.convergents()[-1]
        return Fraction(p, q)

    @property
    def value(self) -> float:
        return float(self.as_fraction())

    def denominators(self) -> list[int]:
        return [q for _, q in self.convergents()]

    def irrationality_exponents(self) -> list[float]:
        """Local exponents ``mu_k = 2 + log a_{k+1} / log q_k`` for ``q_k >= 2``.

        ``|x - p_k/q_k| ~ 1/(a_{k+1} q_k^2)``, so ``mu_k`` is the exponent
        of approximation achieved by the k-th convergent.
        """
        conv = self.convergents()
        out = []
        for k, (_, q) in enumerate(conv[:-1]):
            if q >= 2:
                out.append(2.0 + math.log(self.quotients[k + 1]) / math.log(q))
        return out

    def irrationality_estimate(self) -> float:
        """Largest local exponent, or 2 when no convergent qualifies."""
        return max(self.irrationality_exponents(), default=2.0)

    def is_non_liouville_on_range(self, mu_cap: float = 4.0) -> bool:
        """Epistemic: all observed exponents stay at or below ``mu_cap``."""
        return self.irrationality_estimate() <= mu_cap

    def to_json(self) -> dict:
        return {"label": self.label, "quotients": [str(a) if a.bit_length() > 52 else a for a in self.quotients],
                "value": self.value}


def sqrt2(depth: int = MAX_DEPTH) -> DiophantineNumber:
    return DiophantineNumber((1,) + (2,) * _check_depth(depth), "sqrt2")


def golden(depth: int = MAX_DEPTH) -> DiophantineNumber:
    return DiophantineNumber((1,) + (1,) * _check_depth(depth), "golden")


def liouville_like(b: int, depth: int) -> DiophantineNumber:
    """``[0; b^(1!), b^(2!), ..., b^(depth!)]``."""
    if int(b) != b or b < 2:
        raise DomainError(f"base must be an integer >= 2, got {b!r}")
    _check_depth(depth)
    b = int(b)
    quotients = [0]
    for k in range(1, depth + 1):
        bits = math.factorial(k) * b.bit_length()
        if bits > MAX_QUOTIENT_BITS:
            raise ResourceError(f"quotient b^{k}! has about {bits} bits; cap is {MAX_QUOTIENT_BITS}")
        quotients.append(b ** math.factorial(k))
    return DiophantineNumber(tuple(quotients), f"liouville_like({b},{depth})")


def _check_depth(depth: int) -> int:
    if not 1 <= depth <= MAX_DEPTH:
        raise DomainError(f"depth must be in 1..{MAX_DEPTH}, got {depth!r}")
    return int(depth)


_LIOUVILLE = re.compile(r"^liouville_like\(\s*(\d+)\s*,\s*(\d+)\s*\)$")


def cf_surrogate(kind: str, depth: int | None = None) -> DiophantineNumber:
    """Named surrogate: ``sqrt2``, ``golden`` or ``liouville_like(b, depth)``."""
    kind = kind.strip()
    if kind == "sqrt2":
        return sqrt2(depth or MAX_DEPTH)
    if kind == "golden":
        return golden(depth or MAX_DEPTH)
    match = _LIOUVILLE.match(kind)
    if match:
        return liouville_like(int(match.group(1)), int(match.group(2)))
    raise DomainError(f"unknown surrogate {kind!r}")
