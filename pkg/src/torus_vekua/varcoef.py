"""Variable-coefficient Vekua operators on ``T^{n+1}``.

The operator is

    Pu = u_t - sum_j (p_j(t) + i lam_j q(t)) d_j u - (s(t) + i delta q(t)) u - alpha q(t) conj(u)

with ``q`` of constant sign. A gauge transform ``T`` (multiplication of the
``xi``-th partial Fourier coefficient by ``exp(-i m(t).xi)``) replaces
``p_j(t)`` by its mean ``p0_j``. Each pair of modes ``(u(t, xi), conj u(t, -xi))``
then solves a 2x2 periodic ODE whose matrix ``[[-a, alpha], [conj alpha, a]]``
(``a = lam.xi - i delta``) has eigenvalues ``+-rho_xi``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import margins as mg
from .errors import ConditionError, DomainError, SmallDivisorError
from .spectral import GridFunction, PartialSpectrum, _box_to_fft, _fft_to_box, partial_analyze, partial_synthesize, wavenumbers
from .weightseq import WeightSequence, log_assoc_inf_array

SMALL_DIVISOR_TOL = 1e-10
_SIGN_TOL = 1e-12
_ZERO_TOL = 1e-12
# above this spread the periodic weight exp(-psi) is too badly scaled for
# the Fourier quadrature; those modes fall back to exptrap
_SPECTRAL_SPREAD_MAX = 25.0
_SPECTRAL_GROWTH_MAX = 600.0


@dataclass(frozen=True)
class VarOperatorSpec:
    """Uniform t-samples of ``q``, ``s``, ``p_j`` plus ``lam``, ``alpha``, ``delta``."""

    n: int
    Nt: int
    q: np.ndarray
    s: np.ndarray
    p: np.ndarray
    lam: np.ndarray
    alpha: complex
    delta: float

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        s = np.asarray(self.s, dtype=float)
        p = np.asarray(self.p, dtype=float).reshape(self.n, -1) if np.size(self.p) else np.zeros((self.n, self.Nt))
        lam = np.asarray(self.lam, dtype=float).reshape(-1)
        if self.n < 1 or self.Nt < 4:
            raise DomainError("need n >= 1 and Nt >= 4")
        for name, arr in (("q", q), ("s", s)):
            if arr.shape != (self.Nt,):
                raise DomainError(f"'{name}' must have Nt={self.Nt} samples, got shape {arr.shape}")
        if p.shape != (self.n, self.Nt):
            raise DomainError(f"'p' must have shape ({self.n}, {self.Nt}), got {p.shape}")
        if lam.shape != (self.n,):
            raise DomainError(f"'lambda' must have length n={self.n}")
        if complex(self.alpha) == 0:
            raise DomainError("alpha must be nonzero")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "delta", float(self.delta))

    @classmethod
    def from_functions(cls, q: Callable | float, s: Callable | float, p: Sequence[Callable | float],
                       lam: Sequence[float], alpha: complex, delta: float, Nt: int) -> "VarOperatorSpec":
        """Sample coefficient functions (or constants) on the uniform t-grid."""
        t = 2 * np.pi * np.arange(Nt) / Nt

        def sample(g):
            return np.broadcast_to(np.asarray(g(t) if callable(g) else g, dtype=float), t.shape).copy()

        return cls(len(lam), Nt, sample(q), sample(s), np.array([sample(g) for g in p]), np.asarray(lam), alpha, delta)

    def t_grid(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.Nt) / self.Nt

    def resampled(self, Nt: int) -> "VarOperatorSpec":
        """Trigonometric interpolation of the coefficient samples onto ``Nt`` points."""
        if Nt == self.Nt:
            return self
        return replace(self, Nt=Nt, q=_resample(self.q, Nt).real, s=_resample(self.s, Nt).real,
                       p=np.array([_resample(row, Nt).real for row in self.p]))

    def normalized(self) -> "VarOperatorSpec":
        """Same operator written with ``q >= 0`` (flip ``q, lam, delta, alpha`` together)."""
        if self.q.sum() >= 0:
            return self
        return replace(self, q=-self.q, lam=-self.lam, alpha=-self.alpha, delta=-self.delta)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "Nt": self.Nt,
            "q": self.q.tolist(),
            "s": self.s.tolist(),
            "p": self.p.tolist(),
            "lambda": self.lam.tolist(),
            "alpha": {"re": self.alpha.real, "im": self.alpha.imag},
            "delta": self.delta,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "VarOperatorSpec":
        for key in ("n", "Nt", "q", "s", "p", "lambda", "alpha", "delta"):
            if key not in obj:
                raise DomainError(f"variable-coefficient spec is missing field '{key}'")
        a = obj["alpha"]
        alpha = complex(a.get("re", 0.0), a.get("im", 0.0)) if isinstance(a, dict) else complex(a)
        return cls(int(obj["n"]), int(obj["Nt"]), obj["q"], obj["s"], obj["p"], obj["lambda"], alpha, obj["delta"])


def _resample(values: np.ndarray, N: int, axis: int = -1) -> np.ndarray:
    """Trigonometric interpolation of periodic samples along ``axis``."""
    M = values.shape[axis]
    if M == N:
        return np.asarray(values, dtype=complex)
    c = _fft_to_box(np.fft.fft(values, axis=axis), axis % values.ndim, M)
    K = M // 2
    if K >= N / 2:
        # truncate to the largest box the target grid represents
        K_new = (N - 1) // 2
        sl = [slice(None)] * c.ndim
        sl[axis % c.ndim] = slice(K - K_new, K + K_new + 1)
        c, K = c[tuple(sl)], K_new
    return np.fft.ifft(_box_to_fft(c, axis % values.ndim, K, N), axis=axis) * (N / M)


# -- condition (P) and reduction ---------------------------------------------


def _sign_violation(q: np.ndarray) -> tuple[int, int] | None:
    top = float(np.max(np.abs(q)))
    if top == 0:
        return None
    sign = 1.0 if q.sum() >= 0 else -1.0
    bad = np.flatnonzero(sign * q < -_SIGN_TOL * top)
    if bad.size == 0:
        return None
    k = int(bad[0])
    # interval where the sign flips: between the last good sample and k
    return (k - 1) % q.size, k


def validate_condition_p(spec: VarOperatorSpec) -> bool:
    """True iff ``q`` keeps one sign on the grid (minority values within ``1e-12 max|q|``)."""
    return _sign_violation(spec.q) is None


def require_condition_p(spec: VarOperatorSpec) -> None:
    """Raise :class:`ConditionError` naming the first sign change of ``q``."""
    hit = _sign_violation(spec.q)
    if hit is not None:
        t = spec.t_grid()
        a, b = hit
        raise ConditionError(f"q changes sign between t={t[a]:.6g} and t={t[b]:.6g} (samples {a}, {b})")


@dataclass(frozen=True)
class ReducedData:
    """Means, primitives (on the closed grid ``t_k = 2 pi k / Nt``, ``k = 0..Nt``) and constants."""

    Nt: int
    p0: np.ndarray
    m: np.ndarray
    q0: float
    s0: float
    Q: np.ndarray
    S: np.ndarray
    A0: complex
    B0: complex
    C0: np.ndarray
    lam: np.ndarray
    alpha: complex
    delta: float

    @property
    def Qt(self) -> np.ndarray:
        """``Q(t) - q0 = -int_t^{2 pi} q``."""
        return self.Q - self.q0

    @property
    def t(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.Nt + 1) / self.Nt


def cumulative_trapezoid(values: np.ndarray) -> np.ndarray:
    """Primitive from 0 of periodic samples, on the closed grid (length ``Nt + 1``)."""
    values = np.asarray(values, dtype=float)
    Nt = values.shape[-1]
    h = 2 * np.pi / Nt
    closed = np.concatenate([values, values[..., :1]], axis=-1)
    mids = 0.5 * (closed[..., 1:] + closed[..., :-1]) * h
    out = np.zeros(closed.shape)
    out[..., 1:] = np.cumsum(mids, axis=-1)
    return out


def spectral_primitive(values: np.ndarray) -> np.ndarray:
    """Exact primitive from 0 of the trigonometric interpolant, on the closed grid."""
    values = np.asarray(values, dtype=float)
    Nt = values.shape[-1]
    c = np.fft.fft(values, axis=-1) / Nt
    k = wavenumbers(Nt)
    t = 2 * np.pi * np.arange(Nt + 1) / Nt
    mean = c[..., :1].real
    ck = np.where(k != 0, c / np.where(k != 0, 1j * k, 1.0), 0.0)
    phase = np.exp(1j * np.multiply.outer(t, k)) - 1.0
    periodic = (ck @ phase.T).real if ck.ndim > 1 else (phase @ ck).real
    return mean * t + periodic


def reduce(spec: VarOperatorSpec, primitive: str = "trapezoid") -> ReducedData:
    """Means, primitives and the constants ``A0, B0, C0``.

    ``primitive="trapezoid"`` uses cumulative trapezoid; ``"spectral"``
    integrates the trigonometric interpolant exactly.
    """
    require_condition_p(spec)
    spec = spec.normalized()
    integrate = {"trapezoid": cumulative_trapezoid, "spectral": spectral_primitive}.get(primitive)
    if integrate is None:
        raise DomainError(f"unknown primitive method {primitive!r}")
    h = 2 * np.pi / spec.Nt
    q0 = float(spec.q.sum() * h)
    if q0 <= _SIGN_TOL * float(np.max(np.abs(spec.q), initial=0.0)) * 2 * np.pi or q0 == 0.0:
        raise ConditionError("q is degenerate: its integral over the period vanishes")
    s0 = float(spec.s.sum() * h)
    p0 = spec.p.mean(axis=1)
    m = integrate(spec.p - p0[:, None])
    m[:, -1] = 0.0
    Q = integrate(spec.q)
    Q[-1] = q0
    S = integrate(spec.s)
    S[-1] = s0
    A0 = complex(s0, spec.delta * q0)
    B0 = spec.alpha * q0
    C0 = 2 * np.pi * p0 + 1j * spec.lam * q0
    return ReducedData(spec.Nt, p0, m, q0, s0, Q, S, A0, B0, C0, spec.lam.copy(), spec.alpha, spec.delta)


def apply_T(S: PartialSpectrum, m: np.ndarray, direction: str = "fwd") -> PartialSpectrum:
    """Multiply ``u(t, xi)`` by ``exp(-i m(t).xi)`` (``fwd``) or ``exp(+i m(t).xi)`` (``inv``).

    ``m`` has shape ``(n, Nt)`` (open grid) or ``(n, Nt + 1)`` (closed grid).
    """
    if S.p != 1:
        raise DomainError("apply_T needs a single t axis")
    sign = {"fwd": -1.0, "inv": 1.0}.get(direction)
    if sign is None:
        raise DomainError(f"direction must be 'fwd' or 'inv', got {direction!r}")
    m = np.atleast_2d(np.asarray(m, dtype=float))[:, : S.Nt]
    if m.shape != (S.q, S.Nt):
        raise DomainError(f"m must have shape ({S.q}, {S.Nt})")
    xi = S.frequencies().astype(float)
    phase = np.tensordot(m.T, xi, axes=([1], [xi.ndim - 1]))
    return S.copy(S.values * np.exp(1j * sign * phase))


def rho(xi, lam, delta: float, alpha: complex) -> complex:
    """Root of ``(lam.xi - i delta)^2 + |alpha|^2`` with ``Re >= 0``; ``Im >= 0`` when ``Re = 0``."""
    a = float(np.dot(np.atleast_1d(lam), np.atleast_1d(xi))) - 1j * delta
    r = complex(np.sqrt(complex(a * a + abs(alpha) ** 2)))
    if abs(r.real) <= 1e-14 * max(1.0, abs(r)):
        return complex(0.0, abs(r.imag))
    if r.real < 0:
        r = -r
    return r


def g_vector(xi, fplus: np.ndarray, fminus_conj: np.ndarray, rho_xi: complex, lam, delta: float,
             alpha: complex) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-coordinates of the forcing ``(f(t, xi), conj f(t, -xi))``."""
    a = float(np.dot(np.atleast_1d(lam), np.atleast_1d(xi))) - 1j * delta
    pre = -1.0 / (2 * alpha * rho_xi)
    f1 = np.asarray(fplus, dtype=complex)
    f2 = np.asarray(fminus_conj, dtype=complex)
    G1 = pre * ((a - rho_xi) * f1 - alpha * f2)
    G2 = pre * (-(a + rho_xi) * f1 + alpha * f2)
    return G1, G2


def denominators(xi, red: ReducedData, rho_xi: complex | None = None) -> tuple[complex, complex]:
    """``e^{-rho q0} - e^{c}`` and ``1 - e^{-rho q0 + c}`` with ``c = s0 + 2 pi i xi.p0``."""
    if rho_xi is None:
        rho_xi = rho(xi, red.lam, red.delta, red.alpha)
    c = red.s0 + 2j * np.pi * float(np.dot(np.atleast_1d(xi), red.p0))
    return np.exp(-rho_xi * red.q0) - np.exp(c), 1.0 - np.exp(-rho_xi * red.q0 + c)


def _series(z: np.ndarray, coeffs: Sequence[float]) -> np.ndarray:
    out = np.zeros_like(z)
    for c in reversed(coeffs):
        out = out * z + c
    return out


_PHI1_SERIES = [1.0 / math.factorial(j + 1) for j in range(10)]
_PSI_SERIES = [1.0 / (math.factorial(j) * (j + 2)) for j in range(10)]


def _phi1(z: np.ndarray) -> np.ndarray:
    """``(e^z - 1)/z`` with the removable singularity filled in."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < 0.1
    out[small] = _series(z[small], _PHI1_SERIES)
    zl = z[~small]
    out[~small] = np.expm1(zl) / zl
    return out


def _psi(z: np.ndarray) -> np.ndarray:
    """``int_0^1 s e^{zs} ds = (e^z (z - 1) + 1)/z^2``."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < 0.1
    out[small] = _series(z[small], _PSI_SERIES)
    zl = z[~small]
    out[~small] = (np.exp(zl) * (zl - 1) + 1) / (zl * zl)
    return out


def _particular_trapezoid(red: ReducedData, xp0: float, rho_xi: complex, G1c: np.ndarray, G2c: np.ndarray):
    h = 2 * np.pi / red.Nt
    dQ, dS = np.diff(red.Q), np.diff(red.S)
    d = np.exp(-rho_xi * dQ + 1j * xp0 * h + dS)
    e = np.exp(rho_xi * (red.Q[:-1] - red.Q[1:]) - 1j * xp0 * h + red.S[:-1] - red.S[1:])
    y2 = np.zeros(red.Nt + 1, dtype=complex)
    for k in range(red.Nt):
        y2[k + 1] = d[k] * y2[k] + 0.5 * h * (d[k] * G2c[k] + G2c[k + 1])
    y1 = np.zeros(red.Nt + 1, dtype=complex)
    for k in range(red.Nt - 1, -1, -1):
        y1[k] = e[k] * y1[k + 1] - 0.5 * h * (G1c[k] + e[k] * G1c[k + 1])
    return y1, y2


def _particular_exptrap(red: ReducedData, xp0: float, rho_xi: complex, G1c: np.ndarray, G2c: np.ndarray):
    # exact exponential weight per cell, G linear between nodes
    h = 2 * np.pi / red.Nt
    dQ, dS = np.diff(red.Q), np.diff(red.S)
    z2 = -rho_xi * dQ + 1j * xp0 * h + dS
    z1 = -(rho_xi * dQ + 1j * xp0 * h + dS)
    d, e = np.exp(z2), np.exp(z1)
    p2, s2 = _phi1(z2), _psi(z2)
    p1, s1 = _phi1(z1), _psi(z1)
    y2 = np.zeros(red.Nt + 1, dtype=complex)
    for k in range(red.Nt):
        y2[k + 1] = d[k] * y2[k] + h * (s2[k] * G2c[k] + (p2[k] - s2[k]) * G2c[k + 1])
    y1 = np.zeros(red.Nt + 1, dtype=complex)
    for k in range(red.Nt - 1, -1, -1):
        y1[k] = e[k] * y1[k + 1] - h * ((p1[k] - s1[k]) * G1c[k] + s1[k] * G1c[k + 1])
    return y1, y2


def _particular_spectral(red: ReducedData, xp0: float, rho_xi: complex, G1: np.ndarray, G2: np.ndarray):
    Nt = red.Nt
    t = red.t
    qbar, sbar = red.q0 / (2 * np.pi), red.s0 / (2 * np.pi)
    Qp, Sp = red.Q - qbar * t, red.S - sbar * t
    kappa2 = rho_xi * qbar - 1j * xp0 - sbar
    kappa1 = rho_xi * qbar + 1j * xp0 + sbar
    psi2 = Sp - rho_xi * Qp
    psi1 = Sp + rho_xi * Qp
    k = np.arange(-(Nt // 2), Nt // 2 + 1)
    eikt = np.exp(1j * np.outer(t, k))

    def coeffs(P):
        return _fft_to_box(np.fft.fft(P) / Nt, 0, Nt)

    P2 = coeffs(np.exp(-psi2[:-1]) * G2)
    W2 = eikt * (t[:, None] * _phi1(-np.outer(t, kappa2 + 1j * k)))
    y2 = np.exp(psi2) * (W2 @ P2)
    L = 2 * np.pi - t
    P1 = coeffs(np.exp(-psi1[:-1]) * G1)
    W1 = eikt * (L[:, None] * _phi1(np.outer(L, 1j * k - kappa1)))
    y1 = -np.exp(psi1) * (W1 @ P1)
    return y1, y2


def _spectral_ok(red: ReducedData, xp0: float, rho_xi: complex) -> bool:
    t = red.t
    qbar, sbar = red.q0 / (2 * np.pi), red.s0 / (2 * np.pi)
    Qp, Sp = red.Q - qbar * t, red.S - sbar * t
    spread = abs(rho_xi.real) * float(np.ptp(Qp)) + float(np.ptp(Sp))
    growth = 2 * np.pi * max(abs((rho_xi * qbar - sbar).real), abs((rho_xi * qbar + sbar).real))
    return spread <= _SPECTRAL_SPREAD_MAX and growth <= _SPECTRAL_GROWTH_MAX


_CLOSED_GRID_RULES = {"trapezoid": _particular_trapezoid, "exptrap": _particular_exptrap}
QUADRATURES = ("exptrap", "trapezoid", "spectral")


@dataclass
class ModeResult:
    xi: tuple[int, ...]
    u: np.ndarray
    companion: np.ndarray
    rho: complex
    min_denominator: float
    quadrature: str


def mode_solve(xi, red: ReducedData, G1: np.ndarray, G2: np.ndarray, quadrature: str = "exptrap",
               small_tol: float = SMALL_DIVISOR_TOL, full: bool = False):
    """Periodic solution ``u(t, xi)`` on the open t-grid for the given forcing.

    With ``y_1, y_2`` the eigen-coordinates, ``u = alpha (y_1 + y_2)``.
    ``y_2`` is integrated forward and ``y_1`` backward so both recurrences
    damp, then the homogeneous parts fix periodicity.

    Quadratures: ``"trapezoid"`` (composite trapezoid, O(Nt^-2)),
    ``"exptrap"`` (exact exponential weight per cell with G interpolated
    linearly, also O(Nt^-2) but with a constant free of ``|rho|``) and
    ``"spectral"`` (exact for band-limited data; falls back to ``exptrap``
    when the periodic weight is badly scaled). ``full=True``
    returns a :class:`ModeResult` that also carries ``conj u(t, -xi)``.
    """
    xi = tuple(int(v) for v in np.atleast_1d(xi))
    G1 = np.asarray(G1, dtype=complex)
    G2 = np.asarray(G2, dtype=complex)
    if G1.shape != (red.Nt,) or G2.shape != (red.Nt,):
        raise DomainError(f"forcing must be sampled on the open grid of {red.Nt} points")
    r = rho(xi, red.lam, red.delta, red.alpha)
    den1, den2 = denominators(xi, red, r)
    dmin = min(abs(den1), abs(den2))
    if dmin < small_tol:
        raise SmallDivisorError(f"small divisor {dmin:.3e} at xi={xi}", [xi])
    xp0 = float(np.dot(xi, red.p0)) if xi else 0.0
    used = quadrature
    if quadrature == "spectral" and not _spectral_ok(red, xp0, r):
        used = "exptrap"
    if quadrature not in QUADRATURES:
        raise DomainError(f"unknown quadrature {quadrature!r}")
    if used == "spectral":
        y1p, y2p = _particular_spectral(red, xp0, r, G1, G2)
    elif used in _CLOSED_GRID_RULES:
        y1p, y2p = _CLOSED_GRID_RULES[used](red, xp0, r, np.append(G1, G1[:1]), np.append(G2, G2[:1]))
    else:
        raise DomainError(f"unknown quadrature {quadrature!r}")
    t = red.t
    c = red.s0 + 2j * np.pi * xp0
    # homogeneous parts: y2 ~ D(t) with D(0) = 1, y1 ~ E(t) with E(2 pi) = e^c
    D = np.exp(1j * xp0 * t + red.S - r * red.Q)
    E = np.exp(r * (red.Q - red.q0) + 1j * xp0 * t + red.S)
    K2 = y2p[-1] / den2
    K1 = -y1p[0] / den1
    y1 = K1 * E + y1p
    y2 = K2 * D + y2p
    a = float(np.dot(red.lam, xi)) - 1j * red.delta if xi else -1j * red.delta
    u = (red.alpha * (y1 + y2))[:-1]
    if not full:
        return u
    comp = ((a + r) * y1 + (a - r) * y2)[:-1]
    return ModeResult(xi, u, comp, r, dmin, used)


# -- conditions ----------------------------------------------------------------


@dataclass
class ConditionReport:
    cond_I: bool | None = None
    cond_II: bool | None = None
    cond_II_analytic: bool = False
    witness_II: tuple[int, ...] | None = None
    cond_III: str | None = None
    case: int | None = None
    curves: dict = field(default_factory=dict)
    trends: dict = field(default_factory=dict)
    witnesses: list = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    case1_constant: float | None = None
    min_denominator: float | None = None

    @property
    def verdict(self) -> str:
        if self.case is not None:
            return mg.PASS
        if self.cond_I and self.cond_II and self.cond_III == mg.PASS:
            return mg.PASS
        return mg.FAIL

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "cond_I": self.cond_I,
            "cond_II": self.cond_II,
            "cond_II_analytic": self.cond_II_analytic,
            "witness_II": list(self.witness_II) if self.witness_II is not None else None,
            "cond_III": self.cond_III,
            "case": self.case,
            "case1_constant": self.case1_constant,
            "min_denominator": self.min_denominator,
            "witnesses": [list(w) for w in self.witnesses],
            "notes": list(self.notes),
            "per_eps": [{"curve": name, "eps": eps, "verdict": t.verdict, "log_C": t.log_C,
                         "inner_min": t.inner_min, "outer_min": t.outer_min,
                         "witnesses": [list(w) for w in t.witnesses]}
                        for (name, eps), t in self.trends.items()],
        }

    def margins_csv(self) -> str:
        lines = ["curve,eps,shell_radius,min_log_margin"]
        for (name, eps), curve in self.curves.items():
            for r, m in curve.rows():
                lines.append(f"{name},{float(eps)!r},{r},{m!r}")
        return "\n".join(lines) + "\n"


def lattice_system_witness(red: ReducedData, xi_max: float, tau_max: int,
                           tol: float = 1e-8) -> tuple[tuple[int, ...] | None, bool]:
    """Search ``Re(A0(2 pi tau + xi.conj C0)) = 0``, ``|2 pi tau + xi.C0|^2 = |A0|^2 - |B0|^2``.

    Returns ``(witness (xi..., tau) or None, analytic)``; ``analytic`` is
    True when ``|A0| < |B0|`` already rules out every solution.
    """
    rhs = abs(red.A0) ** 2 - abs(red.B0) ** 2
    if rhs < -tol * (abs(red.A0) ** 2 + abs(red.B0) ** 2):
        return None, True
    n = red.p0.size
    pts = mg.lattice_ball(n, xi_max)
    taus = np.arange(-int(tau_max), int(tau_max) + 1)
    w = 2 * np.pi * taus[None, :] + (pts @ red.C0)[:, None]
    wbar = 2 * np.pi * taus[None, :] + (pts @ np.conj(red.C0))[:, None]
    e1 = np.real(red.A0 * wbar)
    e2 = np.abs(w) ** 2 - rhs
    s1 = 1.0 + abs(red.A0) * np.abs(wbar)
    s2 = 1.0 + np.abs(w) ** 2 + abs(red.A0) ** 2 + abs(red.B0) ** 2
    hit = (np.abs(e1) <= tol * s1) & (np.abs(e2) <= tol * s2)
    if not hit.any():
        return None, False
    ii, jj = np.nonzero(hit)
    best = np.lexsort((taus[jj], np.abs(taus[jj]), np.einsum("ij,ij->i", pts[ii], pts[ii])))[0]
    return tuple(int(v) for v in pts[ii[best]]) + (int(taus[jj[best]]),), False


def _scan_points(n: int, xi_max: float):
    pts = mg.lattice_ball(n, xi_max, floor=1.0)
    return pts, np.linalg.norm(pts, axis=1)


def _min_denominators(red: ReducedData, pts: np.ndarray) -> np.ndarray:
    a = pts @ red.lam - 1j * red.delta
    r = np.sqrt((a * a + abs(red.alpha) ** 2).astype(complex))
    r = np.where(r.real < 0, -r, r)
    flat = np.abs(r.real) <= 1e-14 * np.maximum(1.0, np.abs(r))
    r = np.where(flat, 1j * np.abs(r.imag), r)
    c = red.s0 + 2j * np.pi * (pts @ red.p0)
    d1 = np.abs(np.exp(-r * red.q0) - np.exp(c))
    d2 = np.abs(1.0 - np.exp(-r * red.q0 + c))
    d = np.minimum(d1, d2)
    return np.where(d <= _ZERO_TOL * max(1.0, math.exp(red.s0)), 0.0, d)


def _add_margin_scan(report: ConditionReport, name: str, pts, norms, log_quantity, ws, eps_list, xi_max, slack):
    verdicts = []
    for eps in eps_list:
        margin = log_quantity - log_assoc_inf_array(ws, float(eps), 1.0 + norms)
        report.curves[(name, float(eps))] = mg.shell_minima(norms, margin)
        tr = mg.trend_verdict(pts, norms, margin, 1.0, xi_max, slack)
        report.trends[(name, float(eps))] = tr
        verdicts.append(tr.verdict)
        for w in tr.witnesses:
            if w not in report.witnesses:
                report.witnesses.append(w)
    return mg.PASS if all(v == mg.PASS for v in verdicts) else mg.FAIL


def check_conditions(spec: VarOperatorSpec | ReducedData, ws: WeightSequence, eps_list: Sequence[float],
                     xi_max: float, tau_max: int, slack: float = mg.DEFAULT_SLACK) -> ConditionReport:
    """Conditions (I) ``|alpha| != |delta|``, (II) no lattice solution, (III) denominator margins."""
    red = spec if isinstance(spec, ReducedData) else reduce(spec)
    rep = ConditionReport()
    rep.cond_I = abs(abs(red.alpha) - abs(red.delta)) > 1e-12 * max(1.0, abs(red.alpha), abs(red.delta))
    witness, analytic = lattice_system_witness(red, xi_max, tau_max)
    rep.cond_II, rep.cond_II_analytic, rep.witness_II = witness is None, analytic, witness
    pts, norms = _scan_points(red.p0.size, xi_max)
    dmin = _min_denominators(red, pts)
    rep.min_denominator = float(dmin.min()) if dmin.size else None
    with np.errstate(divide="ignore"):
        logd = np.log(dmin)
    rep.cond_III = _add_margin_scan(rep, "III", pts, norms, logd, ws, eps_list, xi_max, slack)
    return rep


def dc_prime_distance(p0, theta0: float, pts: np.ndarray) -> np.ndarray:
    """``min_tau |2 pi tau + 2 pi xi.p0 - theta0|`` (nearest lattice translate)."""
    x = 2 * np.pi * (pts @ np.atleast_1d(p0)) - theta0
    d = np.abs(x - 2 * np.pi * np.round(x / (2 * np.pi)))
    # round-off level distances are exact lattice hits
    return np.where(d <= _ZERO_TOL * (1.0 + np.abs(x)), 0.0, d)


def dc_double_prime(p0, theta0: float, pts: np.ndarray) -> np.ndarray:
    """``|exp(i(2 pi xi.p0 - theta0)) - 1| = 2 |sin(d'/2)|``."""
    return 2 * np.abs(np.sin(0.5 * dc_prime_distance(p0, theta0, pts)))


def check_thm2(spec: VarOperatorSpec | ReducedData, ws: WeightSequence, eps_list: Sequence[float],
               xi_max: float, tau_max: int, slack: float = mg.DEFAULT_SLACK) -> ConditionReport:
    """Match the ``lam = 0`` operator against cases (1)-(4), first match wins."""
    red = spec if isinstance(spec, ReducedData) else reduce(spec)
    if np.any(red.lam != 0):
        raise DomainError("check_thm2 requires lambda = 0 exactly")
    rep = ConditionReport()
    absA, absB = abs(red.A0), abs(red.B0)
    a, d = abs(red.alpha), abs(red.delta)
    tol = 1e-12 * max(1.0, absA, absB)
    rep.cond_I = abs(a - d) > 1e-12 * max(1.0, a, d)
    r = rho((0,) * red.p0.size, red.lam, red.delta, red.alpha)
    rep.case1_constant = float(min(abs(np.exp(-r * red.q0) - np.exp(red.s0)),
                                   abs(1.0 - np.exp(-r * red.q0 + red.s0))))
    pts, norms = _scan_points(red.p0.size, xi_max)
    dmin = _min_denominators(red, pts)
    rep.min_denominator = float(dmin.min()) if dmin.size else None
    if absB > absA + tol:
        rep.case = 1
        rep.notes.append("case (1): |B0| > |A0|")
        return rep
    witness, analytic = lattice_system_witness(red, xi_max, tau_max)
    rep.cond_II, rep.cond_II_analytic, rep.witness_II = witness is None, analytic, witness
    if a > d and witness is None:
        rep.case = 2
        rep.notes.append("case (2): |B0| <= |A0|, |alpha| > |delta|, no lattice solution on range")
        return rep
    if a < d and abs(red.s0) > 1e-12:
        rep.case = 3
        rep.notes.append("case (3): |alpha| < |delta| and s0 != 0")
        return rep
    if a < d and witness is None:
        theta0 = red.q0 * math.sqrt(d * d - a * a)
        with np.errstate(divide="ignore"):
            logd = np.log(dc_prime_distance(red.p0, theta0, pts))
        verdict = _add_margin_scan(rep, "DC'", pts, norms, logd, ws, eps_list, xi_max, slack)
        if verdict == mg.PASS:
            rep.case = 4
            rep.notes.append("case (4): |alpha| < |delta|, s0 = 0, no lattice solution, DC' passes on range")
            return rep
        rep.notes.append("DC' scan fails on range")
    rep.notes.append("no case matched")
    return rep


@dataclass
class EquivalenceReport:
    theta0: float
    verdict_prime: str
    verdict_double_prime: str
    sandwich_ok: bool
    curves: dict
    trends: dict

    @property
    def agree(self) -> bool:
        return self.verdict_prime == self.verdict_double_prime

    def to_json(self) -> dict:
        return {
            "theta0": self.theta0,
            "verdict_prime": self.verdict_prime,
            "verdict_double_prime": self.verdict_double_prime,
            "agree": self.agree,
            "sandwich_ok": self.sandwich_ok,
            "per_eps": [{"curve": name, "eps": eps, "verdict": t.verdict, "log_C": t.log_C}
                        for (name, eps), t in self.trends.items()],
        }


def dc_equivalence_check(p0, q0: float, delta: float, alpha: complex, ws: WeightSequence,
                         eps_list: Sequence[float], xi_max: float,
                         slack: float = mg.DEFAULT_SLACK) -> EquivalenceReport:
    """Scan both forms of the ``|alpha| < |delta|`` Diophantine condition.

    With ``d' = dist(2 pi xi.p0 - theta0, 2 pi Z)`` and ``d'' = 2|sin(d'/2)|``
    one has ``(2/pi) d' <= d'' <= d'``, so the log margins differ by at most
    ``log(pi/2)``; the sandwich is checked pointwise.
    """
    if not abs(alpha) < abs(delta):
        raise DomainError("the equivalence needs |alpha| < |delta|")
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    theta0 = float(q0) * math.sqrt(delta * delta - abs(alpha) ** 2)
    pts, norms = _scan_points(p0.size, xi_max)
    d1 = dc_prime_distance(p0, theta0, pts)
    d2 = dc_double_prime(p0, theta0, pts)
    sandwich = bool(np.all(d2 <= d1 * (1 + 1e-12) + 1e-15) and np.all(d2 >= (2 / np.pi) * d1 * (1 - 1e-12) - 1e-15))
    rep = ConditionReport()
    with np.errstate(divide="ignore"):
        v1 = _add_margin_scan(rep, "DC'", pts, norms, np.log(d1), ws, eps_list, xi_max, slack)
        v2 = _add_margin_scan(rep, "DC''", pts, norms, np.log(d2), ws, eps_list, xi_max, slack)
    return EquivalenceReport(theta0, v1, v2, sandwich, rep.curves, rep.trends)


# -- solve -------------------------------------------------------------------


def _thread_count(threads: int | None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("TORUS_VEKUA_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise DomainError(f"TORUS_VEKUA_THREADS must be an integer, got {env!r}") from None
    return 1


def _spectral_derivative(samples: np.ndarray, axis: int) -> np.ndarray:
    N = samples.shape[axis]
    k = wavenumbers(N)
    shape = [1] * samples.ndim
    shape[axis] = N
    return np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(samples, axis=axis), axis=axis)


def apply_operator(spec: VarOperatorSpec, u: GridFunction) -> GridFunction:
    """``Pu`` on the grid of ``u`` with spectral derivatives (axis 0 is ``t``)."""
    n = u.n - 1
    if n != spec.n:
        raise DomainError(f"grid has {n} space axes, operator has {spec.n}")
    sp = spec.resampled(u.N)
    bshape = (u.N,) + (1,) * n
    q = sp.q.reshape(bshape)
    out = _spectral_derivative(u.samples, 0)
    for j in range(n):
        out = out - (sp.p[j].reshape(bshape) + 1j * sp.lam[j] * q) * _spectral_derivative(u.samples, j + 1)
    out = out - (sp.s.reshape(bshape) + 1j * sp.delta * q) * u.samples - sp.alpha * q * np.conj(u.samples)
    return GridFunction(u.n, u.N, out)


@dataclass
class VarSolveDiagnostics:
    Nt: int
    quadrature: str
    modes: int = 0
    fallback_modes: list = field(default_factory=list)
    min_denominator: float = math.inf
    dropped_energy: float = 0.0
    rel_residual: float = math.nan
    companion_error: float = 0.0

    def to_json(self) -> dict:
        return {
            "Nt": self.Nt,
            "quadrature": self.quadrature,
            "modes": self.modes,
            "fallback_modes": [list(x) for x in self.fallback_modes],
            "min_denominator": self.min_denominator,
            "dropped_energy": self.dropped_energy,
            "rel_residual": self.rel_residual,
            "companion_error": self.companion_error,
        }


def solve(spec: VarOperatorSpec, f: GridFunction, Nt: int | None = None, xi_max: float | None = None,
          quadrature: str = "exptrap", primitive: str | None = None, small_tol: float = SMALL_DIVISOR_TOL,
          threads: int | None = None, tau_max: int | None = None) -> tuple[GridFunction, VarSolveDiagnostics]:
    """Solve ``Pu = f`` for ``f`` sampled on ``T^{n+1}`` (axis 0 is ``t``).

    Conditions (I) and (II) are checked first (``ConditionError`` if they
    fail); small divisors surface per mode as :class:`SmallDivisorError`.
    Modes with ``|xi| > xi_max`` are dropped and their share of the energy
    is reported.
    """
    if f.n != spec.n + 1:
        raise DomainError(f"f lives on T^{f.n}, operator needs T^{spec.n + 1}")
    Nt = f.N if Nt is None else int(Nt)
    primitive = primitive or ("spectral" if quadrature == "spectral" else "trapezoid")
    work = spec.resampled(Nt)
    red = reduce(work, primitive)
    if not abs(abs(red.alpha) - abs(red.delta)) > 1e-12 * max(1.0, abs(red.alpha)):
        raise ConditionError("condition (I) fails: |alpha| = |delta|")
    PS = partial_analyze(f, p=1)
    K = min(PS.K, (Nt - 1) // 2, (f.N - 1) // 2)
    if xi_max is not None:
        K = min(K, int(math.floor(xi_max)))
    radius = float(K * math.sqrt(spec.n)) if xi_max is None else float(xi_max)
    witness, _ = lattice_system_witness(red, min(radius, K * math.sqrt(spec.n)),
                                        Nt // 2 if tau_max is None else tau_max)
    if witness is not None:
        raise ConditionError(f"condition (II) fails: lattice solution (xi, tau) = {witness}")
    cut = (slice(None),) + (slice(PS.K - K, PS.K + K + 1),) * spec.n
    full_energy = float(np.sum(np.abs(PS.values) ** 2))
    values = PS.values[cut]
    box_energy = float(np.sum(np.abs(values) ** 2))
    values = values if Nt == f.N else _resample(values, Nt, axis=0)
    PS = PartialSpectrum(1, spec.n, Nt, K, values)
    xi_grid = PS.frequencies().reshape(-1, spec.n)
    norms = np.linalg.norm(xi_grid, axis=1)
    flat = PS.values.reshape(Nt, -1)
    energy = np.sum(np.abs(flat) ** 2, axis=0)
    keep = norms <= radius + 1e-9
    total = float(energy.sum())
    diag = VarSolveDiagnostics(Nt, quadrature)
    if full_energy > 0:
        kept = box_energy * (float(energy[keep].sum()) / total if total > 0 else 1.0)
        diag.dropped_energy = max(0.0, 1.0 - kept / full_energy)

    TF = apply_T(PS, red.m, "fwd").values.reshape(Nt, -1)
    reflect = {tuple(int(v) for v in x): i for i, x in enumerate(xi_grid)}
    scale = float(np.max(np.abs(TF))) if TF.size else 0.0
    active = []
    for i, x in enumerate(xi_grid):
        if not keep[i]:
            continue
        j = reflect[tuple(-int(v) for v in x)]
        if scale > 0 and max(np.max(np.abs(TF[:, i])), np.max(np.abs(TF[:, j]))) > 1e-15 * scale:
            active.append((i, j))

    def work_mode(pair):
        i, j = pair
        xi = tuple(int(v) for v in xi_grid[i])
        r = rho(xi, red.lam, red.delta, red.alpha)
        G1, G2 = g_vector(xi, TF[:, i], np.conj(TF[:, j]), r, red.lam, red.delta, red.alpha)
        return i, mode_solve(xi, red, G1, G2, quadrature, small_tol, full=True)

    n_threads = _thread_count(threads)
    if n_threads > 1 and len(active) > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(work_mode, active))
    else:
        results = [work_mode(pair) for pair in active]

    U = np.zeros_like(TF)
    for i, res in results:
        U[:, i] = res.u
        diag.modes += 1
        diag.min_denominator = min(diag.min_denominator, res.min_denominator)
        if res.quadrature != quadrature:
            diag.fallback_modes.append(res.xi)
    by_index = dict(results)
    comp_err = 0.0
    for i, res in results:
        j = reflect[tuple(-v for v in res.xi)]
        if j in by_index:
            comp_err = max(comp_err, float(np.max(np.abs(res.companion - np.conj(U[:, j])))))
    umax = float(np.max(np.abs(U))) if U.size else 0.0
    diag.companion_error = comp_err / umax if umax > 0 else comp_err
    diag.fallback_modes.sort()

    V = PartialSpectrum(1, spec.n, Nt, K, U.reshape(PS.values.shape))
    u = partial_synthesize(apply_T(V, red.m, "inv"), Nt)
    f_ref = f if f.N == Nt else GridFunction(f.n, Nt, _resample_grid(f.samples, Nt))
    res_grid = apply_operator(spec, u).samples - f_ref.samples
    top = float(np.max(np.abs(f_ref.samples)))
    err = float(np.max(np.abs(res_grid)))
    diag.rel_residual = err / top if top > 0 else err
    return u, diag


def _resample_grid(samples: np.ndarray, N: int) -> np.ndarray:
    out = samples
    for axis in range(samples.ndim):
        out = _resample(out, N, axis=axis)
    return out
