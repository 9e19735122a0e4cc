"""Weight sequences, their associated functions, and partition combinatorics.

Everything is kept in log domain: ``log_m(j)`` instead of ``m_j`` and
``log j!`` accumulated incrementally, since ``j!`` overflows a double near
``j = 170``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import DomainError, ResourceError

SCAN_CAP = 100_000
# consecutive strict increases that end a unimodal scan
_STOP_AFTER = 3
_LOG_TOL = 1e-12


@lru_cache(maxsize=32)
def _log_factorial_table(size: int) -> np.ndarray:
    table = np.zeros(size + 1)
    table[1:] = np.cumsum(np.log(np.arange(1, size + 1, dtype=float)))
    table.setflags(write=False)
    return table


def log_factorial(j):
    """``log j!`` for a nonnegative int or integer array."""
    top = int(np.max(j)) if np.ndim(j) else int(j)
    size = 1 << max(8, top.bit_length())
    return _log_factorial_table(size)[j]


@dataclass(frozen=True)
class WeightSequence:
    """A weight sequence ``m_j`` given through ``log_m``.

    ``log_m`` must accept a nonnegative int or an integer numpy array.
    ``descriptor`` is the JSON form the sequence was built from.
    """

    log_m: Callable
    H: float
    label: str
    descriptor: dict = field(default_factory=dict, compare=False)

    def log_m_array(self, j_max: int) -> np.ndarray:
        """``log m_j`` for ``j = 0..j_max``."""
        return np.asarray(self.log_m(np.arange(j_max + 1)), dtype=float)

    def to_json(self) -> dict:
        return dict(self.descriptor)


def make_gevrey(s: float) -> WeightSequence:
    """Gevrey weights ``m_j = (j!)^(s-1)``."""
    if not s >= 1:
        raise DomainError(f"Gevrey order must satisfy s >= 1, got {s!r}")
    s = float(s)

    def log_m(j):
        return (s - 1.0) * log_factorial(j)

    draft = WeightSequence(log_m, 1.0, f"gevrey(s={s:g})")
    sup = _stability_sup(draft.log_m_array(128), 64)
    H = 1.0
    while math.log(H) < sup - _LOG_TOL:
        H *= 2.0
    return WeightSequence(log_m, H, draft.label, {"kind": "gevrey", "s": s})


def make_table(log_m: Sequence[float], H: float | None = None, label: str = "table") -> WeightSequence:
    """Weights given as a finite table of ``log m_j``.

    Without ``H`` the estimate from :func:`validate` over the whole table is used.
    """
    values = np.asarray(log_m, dtype=float)
    if values.ndim != 1 or values.size < 2:
        raise DomainError("a weight table needs at least log m_0 and log m_1")
    values.setflags(write=False)
    n = values.size

    def lookup(j):
        if np.max(j) >= n:
            raise ResourceError(f"weight table '{label}' has {n} entries; index {int(np.max(j))} requested")
        return values[j]

    if H is None:
        H = max(1.0, math.exp(_stability_sup(values, n - 1)))
    desc = {"kind": "table", "log_m": values.tolist(), "H": float(H)}
    return WeightSequence(lookup, float(H), label, desc)


def from_json(obj: dict) -> WeightSequence:
    kind = obj.get("kind")
    if kind == "gevrey":
        return make_gevrey(float(obj["s"]))
    if kind == "table":
        return make_table(obj["log_m"], obj.get("H"), obj.get("label", "table"))
    raise DomainError(f"unknown weight-sequence kind {kind!r}")


def _stability_sup(log_m: np.ndarray, total_max: int) -> float:
    """sup over ``1 <= j+k <= total_max`` of ``(log m_{j+k} - log m_j - log m_k)/(j+k)``."""
    best = 0.0
    for total in range(1, total_max + 1):
        j = np.arange(total + 1)
        vals = (log_m[total] - log_m[j] - log_m[total - j]) / total
        best = max(best, float(vals.max()))
    return best


@dataclass
class ValidationReport:
    normalized: bool
    log_convex: bool
    stable: bool
    H_estimate: float
    j_max: int
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.normalized and self.log_convex and self.stable


def validate(ws: WeightSequence, j_max: int) -> ValidationReport:
    """Check properties i-iii over indices up to ``j_max``.

    Property iii is scanned over pairs with ``j + k <= j_max``; the supremum
    found is reported as an estimate of ``H``.
    """
    if j_max < 2:
        raise DomainError("j_max must be at least 2")
    lm = ws.log_m_array(j_max)
    failures = []
    normalized = abs(lm[0]) <= _LOG_TOL and abs(lm[1]) <= _LOG_TOL
    if not normalized:
        failures.append(f"property i: log m_0={lm[0]:.6g}, log m_1={lm[1]:.6g}")
    gaps = lm[:-2] + lm[2:] - 2 * lm[1:-1]
    bad = np.flatnonzero(gaps < -1e-9 * (1 + np.abs(lm[1:-1])))
    log_convex = bad.size == 0
    if not log_convex:
        failures.append(f"property ii fails at j={int(bad[0]) + 1}")
    H_est = max(1.0, math.exp(_stability_sup(lm, j_max)))
    stable = H_est <= ws.H * (1 + 1e-12)
    if not stable:
        failures.append(f"property iii: estimated H={H_est:.6g} exceeds H={ws.H:.6g}")
    return ValidationReport(normalized, log_convex, stable, H_est, j_max, failures)


def log_assoc_inf(ws: WeightSequence, eps: float, t: float) -> float:
    """``log inf_j m_j j! / (eps t)^j`` by a unimodal scan upward from ``j = 0``."""
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps!r}")
    if not t >= 1:
        raise DomainError(f"t must be >= 1, got {t!r}")
    x = math.log(eps) + math.log(t)
    best = 0.0
    prev = 0.0
    rises = 0
    log_fact = 0.0
    j = 0
    while rises < _STOP_AFTER:
        j += 1
        if j > SCAN_CAP:
            raise ResourceError(f"associated-function scan exceeded {SCAN_CAP} terms at eps={eps!r}, t={t!r}")
        log_fact += math.log(j)
        term = float(ws.log_m(j)) + log_fact - j * x
        if term > prev:
            rises += 1
        else:
            rises = 0
        best = min(best, term)
        prev = term
    return best


def log_assoc_inf_array(ws: WeightSequence, eps: float, t) -> np.ndarray:
    """Vectorized :func:`log_assoc_inf` over an array of ``t``.

    For log-convex ``m_j j!`` the minimizing index is the number of
    increments ``L_j - L_{j-1}`` not exceeding ``log(eps t)``, found with
    ``searchsorted``; otherwise a direct minimum over ``j`` is taken.
    """
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps!r}")
    t = np.asarray(t, dtype=float)
    if t.size and t.min() < 1:
        raise DomainError("t must be >= 1")
    x = math.log(eps) + np.log(t)
    if x.size == 0:
        return np.zeros_like(t)
    x_max = float(x.max())
    J = 64
    while True:
        L = ws.log_m_array(J) + log_factorial(np.arange(J + 1))
        steps = np.diff(L)
        if steps[-1] > x_max:
            break
        if J >= SCAN_CAP:
            raise ResourceError(f"associated-function scan exceeded {SCAN_CAP} terms at eps={eps!r}, t={float(t.max())!r}")
        J = min(2 * J, SCAN_CAP)
    if np.all(np.diff(steps) >= -1e-12):
        jstar = np.searchsorted(steps, x, side="right")
        return np.minimum(L[jstar] - jstar * x, 0.0)
    out = np.empty(x.shape)
    flat_x, flat_out = x.ravel(), out.reshape(-1)
    j = np.arange(J + 1)
    for start in range(0, flat_x.size, 4096):
        chunk = flat_x[start:start + 4096]
        flat_out[start:start + 4096] = np.min(L[None, :] - j[None, :] * chunk[:, None], axis=1)
    return out


def enumerate_delta(k: int) -> list[tuple[int, ...]]:
    """All ``gamma`` in N_0^k with ``sum_l l*gamma_l = k``, in lexicographic order."""
    if k < 0:
        raise DomainError("k must be nonnegative")
    if k > 40:
        raise ResourceError(f"enumerate_delta is capped at k=40, got {k}")
    out = [tuple(g) for g in _delta_rec(k, k)]
    out.sort()
    return out


def _delta_rec(k: int, remaining: int, part: int = 1) -> Iterator[list[int]]:
    # fills gamma_part..gamma_k so that sum l*gamma_l over those == remaining
    if part > k:
        if remaining == 0:
            yield []
        return
    for count in range(remaining // part + 1):
        for rest in _delta_rec(k, remaining - count * part, part + 1):
            yield [count] + rest


def delta_sum_identity(k: int, R: float) -> tuple[float, float]:
    """Both sides of ``sum_{Delta(k)} |g|!/g! R^|g| = R (1+R)^(k-1)``."""
    if not 1 <= k <= 20:
        raise DomainError("delta_sum_identity needs 1 <= k <= 20")
    if not R > 0:
        raise DomainError("R must be positive")
    lhs = 0.0
    for gamma in enumerate_delta(k):
        size = sum(gamma)
        coeff = math.factorial(size)
        for g in gamma:
            coeff //= math.factorial(g)
        lhs += coeff * R ** size
    return lhs, R * (1 + R) ** (k - 1)


def product_bound_violations(ws: WeightSequence, k: int, slack: float = 1e-9) -> list[tuple[int, ...]]:
    """Indices ``gamma`` in Delta(k) breaking ``m_|g| prod m_l^g_l <= m_k``."""
    lm = ws.log_m_array(max(k, 1))
    bad = []
    for gamma in enumerate_delta(k):
        lhs = lm[sum(gamma)] + sum(g * lm[ell] for ell, g in enumerate(gamma, start=1))
        if lhs > lm[k] + slack:
            bad.append(gamma)
    return bad


def factorial_stability_constant(ws: WeightSequence) -> float:
    """Moderate-growth constant of ``m_j j!`` implied by that of ``m_j``.

    ``(j+k)!/(j! k!) <= 2^(j+k)``, so ``2H`` works for ``m_j j!``.
    """
    return 2.0 * ws.H


def sup_square_check(ws: WeightSequence, rho: float, H: float | None = None) -> tuple[float, float]:
    """Log of both sides of ``(sup_j rho^j/(m_j j!))^2 <= sup_j (rho H)^j/(m_j j!)``.

    ``H`` defaults to :func:`factorial_stability_constant`.
    """
    if H is None:
        H = factorial_stability_constant(ws)
    lhs = -2.0 * log_assoc_inf(ws, rho, 1.0)
    rhs = -log_assoc_inf(ws, rho * H, 1.0)
    return lhs, rhs


def gevrey_bounds_check(s: float, t: float) -> tuple[float, float, float]:
    """Lower bound, value and upper bound of ``sup_j log(t^j/(j!)^s)``."""
    if not s > 1:
        raise DomainError(f"the lower bound needs s > 1, got {s!r}")
    if not t >= 1:
        raise DomainError(f"t must be >= 1, got {t!r}")
    root = t ** (1.0 / s)
    mid = -log_assoc_inf(make_gevrey(s), 1.0, t)
    lower = root - s * math.log(1.0 / (1.0 - 1.0 / s))
    return lower, mid, s * root


def partition_count(k: int) -> int:
    """Partition number p(k) via Euler's pentagonal recurrence."""
    p = [1] + [0] * k
    for n in range(1, k + 1):
        total, i = 0, 1
        while True:
            g1 = i * (3 * i - 1) // 2
            if g1 > n:
                break
            sign = 1 if i % 2 else -1
            total += sign * p[n - g1]
            g2 = i * (3 * i + 1) // 2
            if g2 <= n:
                total += sign * p[n - g2]
            i += 1
        p[n] = total
    return p[k]
