"""Shell minima and the finite-range trend verdict shared by the scanners.

A margin is a log-ratio that a Diophantine-type condition requires to be
bounded below. On a finite scan "bounded below" is judged by comparing the
worst value in the inner half of the radial range with the worst value in
the outer half: a drop of more than ``slack`` log units flags a witness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

PASS = "pass-on-range"
FAIL = "fail-witness"
DEGENERATE = "degenerate"

DEFAULT_SLACK = 1.0


def lattice_ball(n: int, radius: float, floor: float = 0.0) -> np.ndarray:
    """Integer vectors with ``floor <= |xi| <= radius``, shape ``(count, n)``.

    Rows come out in lexicographic order.
    """
    R = int(math.floor(radius))
    axis = np.arange(-R, R + 1)
    pts = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
    r2 = np.einsum("ij,ij->i", pts, pts)
    keep = (r2 <= radius * radius + 1e-9) & (r2 >= floor * floor - 1e-9)
    return pts[keep]


@dataclass
class MarginCurve:
    """Minimum margin per integer shell ``[r, r+1)``."""

    radii: np.ndarray
    minima: np.ndarray

    def rows(self) -> list[tuple[int, float]]:
        return [(int(r), float(m)) for r, m in zip(self.radii, self.minima)]

    def is_nondecreasing(self, tol: float = 1e-9) -> bool:
        finite = self.minima[np.isfinite(self.minima)]
        return bool(np.all(np.diff(finite) >= -tol))


def shell_minima(norms: np.ndarray, margins: np.ndarray) -> MarginCurve:
    shells = np.floor(norms + 1e-9).astype(int)
    radii = np.unique(shells)
    minima = np.full(radii.size, np.inf)
    np.minimum.at(minima, np.searchsorted(radii, shells), margins)
    return MarginCurve(radii, minima)


@dataclass
class TrendVerdict:
    verdict: str
    log_C: float
    inner_min: float
    outer_min: float
    witnesses: list[tuple[int, ...]] = field(default_factory=list)
    witness_margins: list[float] = field(default_factory=list)


def trend_verdict(
    points: np.ndarray,
    norms: np.ndarray,
    margins: np.ndarray,
    floor: float,
    radius: float,
    slack: float = DEFAULT_SLACK,
) -> TrendVerdict:
    """Classify margins over ``floor <= |xi| <= radius``.

    Witnesses are the record-setting frequencies of the running minimum
    taken in order of increasing norm that fall more than ``slack`` below
    the innermost shell.
    """
    if margins.size == 0:
        return TrendVerdict(PASS, math.inf, math.inf, math.inf)
    log_C = float(margins.min())
    split = 0.5 * (floor + radius)
    inner = norms <= split
    inner_min = float(margins[inner].min()) if inner.any() else math.inf
    outer_min = float(margins[~inner].min()) if (~inner).any() else math.inf
    failed = not math.isfinite(log_C) or (math.isfinite(inner_min) and inner_min - outer_min > slack)
    if not failed:
        return TrendVerdict(PASS, log_C, inner_min, outer_min)
    order = np.lexsort((np.arange(norms.size), norms))
    running = np.minimum.accumulate(margins[order])
    record = np.ones(order.size, dtype=bool)
    record[1:] = running[1:] < running[:-1]
    first_shell = norms < math.floor(norms.min() + 1e-9) + 1
    reference = float(margins[first_shell].min()) - slack
    picks = [int(i) for i in order[record] if margins[i] < reference]
    witnesses = [canonical(points[i]) for i in picks]
    return TrendVerdict(FAIL, log_C, inner_min, outer_min, witnesses, [float(margins[i]) for i in picks])


def canonical(xi) -> tuple[int, ...]:
    """Lexicographically smallest of ``xi`` and ``-xi``."""
    a = tuple(int(v) for v in xi)
    b = tuple(-v for v in a)
    return min(a, b)
