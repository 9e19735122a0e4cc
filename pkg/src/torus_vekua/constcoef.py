"""Constant-coefficient operators ``Pu = Lu - Au - B conj(u)`` on the torus.

``L = sum_{0<|alpha|<=m} c_alpha d^alpha`` acts on ``e^{i xi.x}`` through its
symbol ``sigma(xi) = sum i^|alpha| c_alpha xi^alpha``. Modes ``xi`` and
``-xi`` are coupled by the conjugation; the determinant of the resulting
2x2 system is the discriminant ``Delta_xi``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath
import numpy as np

from . import margins as mg
from .diophantine import DiophantineNumber, cf_surrogate  # noqa: F401  (re-exported)
from .errors import DomainError, IncompatibilityError
from .spectral import Spectrum, synthesize
from .weightseq import WeightSequence, log_assoc_inf_array

TOL_ZERO = 1e-10
# working precision (decimal digits) for re-evaluating near-zero discriminants
_MP_DPS = 80
_MP_ZERO = 1e-60


@dataclass(frozen=True)
class ConstOperatorSpec:
    """Coefficient table ``alpha -> c_alpha`` (no ``alpha = 0``) plus ``A`` and ``B``."""

    n: int
    terms: dict
    A: complex = 0j
    B: complex = 0j

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("dimension n must be >= 1")
        clean = {}
        for alpha, c in self.terms.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.n or any(a < 0 for a in alpha):
                raise DomainError(f"multi-index {alpha} invalid for n={self.n}")
            if sum(alpha) == 0:
                raise DomainError("zeroth-order terms belong in A, not in L")
            if c != 0:
                clean[alpha] = clean.get(alpha, 0j) + complex(c)
        if not clean:
            raise DomainError("L needs at least one term of order >= 1")
        object.__setattr__(self, "terms", clean)
        object.__setattr__(self, "A", complex(self.A))
        object.__setattr__(self, "B", complex(self.B))

    @property
    def order(self) -> int:
        return max(sum(a) for a in self.terms)

    def with_constants(self, A: complex, B: complex) -> "ConstOperatorSpec":
        return ConstOperatorSpec(self.n, dict(self.terms), A, B)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "terms": [{"alpha": list(a), "re": c.real, "im": c.imag} for a, c in sorted(self.terms.items())],
            "A": _complex_json(self.A),
            "B": _complex_json(self.B),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ConstOperatorSpec":
        """Parse the JSON form; ``{"preset": {...}}`` builds a named preset."""
        if "preset" in obj:
            p = dict(obj["preset"])
            name = p.pop("name")
            base = preset(name, **p)
            return base.with_constants(_complex_from(obj.get("A", 0)), _complex_from(obj.get("B", 0)))
        for key in ("n", "terms"):
            if key not in obj:
                raise DomainError(f"operator spec is missing field '{key}'")
        terms = {}
        for row in obj["terms"]:
            if "alpha" not in row:
                raise DomainError("operator term is missing field 'alpha'")
            terms[tuple(row["alpha"])] = complex(row.get("re", 0.0), row.get("im", 0.0))
        return cls(int(obj["n"]), terms, _complex_from(obj.get("A", 0)), _complex_from(obj.get("B", 0)))


def _complex_json(z: complex) -> dict:
    return {"re": z.real, "im": z.imag}


def _complex_from(v) -> complex:
    if isinstance(v, dict):
        return complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    return complex(v)


# -- symbol and discriminant ---------------------------------------------


def _points(xi) -> tuple[np.ndarray, bool]:
    pts = np.asarray(xi)
    scalar = pts.ndim <= 1
    return np.atleast_2d(pts).astype(float), scalar


def _symbol_pts(spec: ConstOperatorSpec, pts: np.ndarray, sign: float = 1.0) -> np.ndarray:
    out = np.zeros(pts.shape[0], dtype=complex)
    for alpha, c in spec.terms.items():
        mono = np.ones(pts.shape[0])
        for j, a in enumerate(alpha):
            if a:
                mono = mono * pts[:, j] ** a
        k = sum(alpha)
        out += (1j ** k) * c * (sign ** k) * mono
    return out


def symbol(spec: ConstOperatorSpec, xi):
    """``sigma_L(xi)`` for one frequency vector or an array of them (rows)."""
    pts, scalar = _points(xi)
    if pts.shape[1] != spec.n:
        raise DomainError(f"frequency dimension {pts.shape[1]} != n={spec.n}")
    val = _symbol_pts(spec, pts)
    return complex(val[0]) if scalar else val


def discriminant(spec: ConstOperatorSpec, xi):
    """``(sigma(xi) - A)(conj sigma(-xi) - conj A) - |B|^2``."""
    pts, scalar = _points(xi)
    if pts.shape[1] != spec.n:
        raise DomainError(f"frequency dimension {pts.shape[1]} != n={spec.n}")
    plus = _symbol_pts(spec, pts) - spec.A
    minus = np.conj(_symbol_pts(spec, pts, -1.0)) - np.conj(spec.A)
    val = plus * minus - abs(spec.B) ** 2
    return complex(val[0]) if scalar else val


def discriminant_mp(spec: ConstOperatorSpec, xi) -> mpmath.mpc:
    """Discriminant in extended precision.

    Float coefficients convert to mpmath exactly, so for moderate ``xi`` the
    result is the exact discriminant of the operator as stored.
    """
    with mpmath.workdps(_MP_DPS):
        xi = [int(v) for v in xi]
        sp = mpmath.mpc(0)
        sm = mpmath.mpc(0)
        for alpha, c in spec.terms.items():
            mono = mpmath.mpf(1)
            for v, a in zip(xi, alpha):
                mono *= mpmath.mpf(v) ** a
            k = sum(alpha)
            term = mpmath.mpc(1j) ** k * mpmath.mpc(c.real, c.imag) * mono
            sp += term
            sm += term * (-1) ** k
        A = mpmath.mpc(spec.A.real, spec.A.imag)
        B2 = mpmath.mpf(spec.B.real) ** 2 + mpmath.mpf(spec.B.imag) ** 2
        return (sp - A) * (mpmath.conj(sm) - mpmath.conj(A)) - B2


def _zero_threshold(spec: ConstOperatorSpec, norms: np.ndarray, tol_zero: float) -> np.ndarray:
    return tol_zero * (1.0 + norms) ** (2 * spec.order)


def _refined_abs(spec: ConstOperatorSpec, pts: np.ndarray, norms: np.ndarray, tol_zero: float):
    """``|Delta|`` over ``pts`` with near-zero values re-evaluated exactly.

    Returns the magnitudes and a mask of genuine zeros.
    """
    mag = np.abs(discriminant(spec, pts))
    suspects = np.flatnonzero(mag <= _zero_threshold(spec, norms, tol_zero))
    zero = np.zeros(mag.size, dtype=bool)
    scale = (1.0 + max(abs(c) for c in spec.terms.values()) + abs(spec.A) + abs(spec.B)) ** 2
    for i in suspects:
        exact = abs(discriminant_mp(spec, pts[i]))
        if exact <= _MP_ZERO * scale * (1.0 + norms[i]) ** (2 * spec.order):
            zero[i] = True
            mag[i] = 0.0
        else:
            mag[i] = float(exact)
    return mag, zero


def zero_set(spec: ConstOperatorSpec, xi_max: float, tol_zero: float = TOL_ZERO) -> list[tuple[int, ...]]:
    """Frequencies with ``|xi| <= xi_max`` where the discriminant vanishes.

    Values under ``tol_zero (1+|xi|)^(2m)`` are re-evaluated in extended
    precision and kept only if they vanish there too.
    """
    pts = mg.lattice_ball(spec.n, xi_max)
    norms = np.linalg.norm(pts, axis=1)
    _, zero = _refined_abs(spec, pts, norms, tol_zero)
    return [tuple(int(v) for v in p) for p in pts[zero]]


# -- per-mode and full solves ----------------------------------------------


@dataclass
class ModeSolution:
    uplus: complex
    uminus: complex
    unique: bool
    discriminant: complex


@dataclass
class Certificate:
    """Evidence that the modes ``+-xi`` of ``f`` violate compatibility."""

    xi: tuple[int, ...]
    discriminant: complex
    fplus: complex
    fminus: complex
    residual: float

    def to_json(self) -> dict:
        return {
            "xi": list(self.xi),
            "discriminant": _complex_json(self.discriminant),
            "f_plus": _complex_json(self.fplus),
            "f_minus": _complex_json(self.fminus),
            "lstsq_residual": self.residual,
        }


def mode_matrix(spec: ConstOperatorSpec, xi) -> np.ndarray:
    """Matrix acting on ``(u(xi), conj u(-xi))`` for a nonzero mode."""
    sp = symbol(spec, xi)
    sm = symbol(spec, [-v for v in np.atleast_1d(xi)])
    return np.array([[sp - spec.A, -spec.B], [-np.conj(spec.B), np.conj(sm) - np.conj(spec.A)]])


def _zero_mode_matrix(spec: ConstOperatorSpec) -> np.ndarray:
    # -A u - B conj(u) as a real map on (Re u, Im u)
    ca = -(spec.A + spec.B)
    cb = -1j * (spec.A - spec.B)
    return np.array([[ca.real, cb.real], [ca.imag, cb.imag]])


def _lstsq(M: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, float]:
    sol, *_ = np.linalg.lstsq(M, rhs, rcond=1e-10)
    res = float(np.linalg.norm(M @ sol - rhs))
    return sol, res


def solve_mode(spec: ConstOperatorSpec, xi, fplus: complex, fminus: complex,
               tol_zero: float = TOL_ZERO) -> ModeSolution | Certificate:
    """Solve the modes ``xi`` and ``-xi`` of ``Pu = f``.

    Returns ``u(xi), u(-xi)``. A (numerically) singular system yields the
    minimal-norm solution flagged non-unique when it is consistent, and a
    :class:`Certificate` otherwise.
    """
    xi = tuple(int(v) for v in np.atleast_1d(xi))
    norm = math.sqrt(sum(v * v for v in xi))
    delta = discriminant(spec, xi)
    threshold = tol_zero * (1.0 + norm) ** (2 * spec.order)
    fplus, fminus = complex(fplus), complex(fminus)
    if not any(xi):
        M = _zero_mode_matrix(spec)
        rhs = np.array([fplus.real, fplus.imag])
        if abs(delta) > threshold:
            a, b = np.linalg.solve(M, rhs)
            return ModeSolution(complex(a, b), complex(a, b), True, delta)
        sol, res = _lstsq(M, rhs)
        if res <= 1e-9 * max(1.0, float(np.linalg.norm(rhs))):
            u0 = complex(sol[0], sol[1])
            return ModeSolution(u0, u0, False, delta)
        return Certificate(xi, delta, fplus, fminus, res)
    M = mode_matrix(spec, xi)
    rhs = np.array([fplus, np.conj(fminus)])
    if abs(delta) > threshold:
        x, y = np.linalg.solve(M, rhs)
        return ModeSolution(complex(x), complex(np.conj(y)), True, delta)
    sol, res = _lstsq(M, rhs)
    if res <= 1e-9 * max(1.0, float(np.linalg.norm(rhs))):
        return ModeSolution(complex(sol[0]), complex(np.conj(sol[1])), False, delta)
    return Certificate(xi, delta, fplus, fminus, res)


def apply_operator(spec: ConstOperatorSpec, U: Spectrum) -> Spectrum:
    """Spectrum of ``Pu``."""
    pts = U.frequencies().reshape(-1, U.n)
    sig = _symbol_pts(spec, pts.astype(float)).reshape(U.coeffs.shape)
    out = sig * U.coeffs - spec.A * U.coeffs - spec.B * np.conj(U.reflected())
    return Spectrum(U.n, U.K, out, real=False)


@dataclass
class SolveDiagnostics:
    nonunique: list[tuple[int, ...]] = field(default_factory=list)
    certificates: list[Certificate] = field(default_factory=list)
    rel_residual: float = math.nan
    grid: int = 0

    def to_json(self) -> dict:
        return {
            "nonunique": [list(x) for x in self.nonunique],
            "certificates": [c.to_json() for c in self.certificates],
            "rel_residual": self.rel_residual,
            "grid": self.grid,
        }


def relative_residual(spec: ConstOperatorSpec, U: Spectrum, F: Spectrum, N: int) -> float:
    """``max |Pu - f| / max |f|`` on the ``N^n`` grid."""
    K = max(U.K, F.K)
    PU = apply_operator(spec, U.resized(K))
    diff = synthesize(Spectrum(U.n, K, PU.coeffs - F.resized(K).coeffs), N).samples
    ref = synthesize(F.resized(K), N).samples
    top = float(np.max(np.abs(ref)))
    err = float(np.max(np.abs(diff)))
    return err / top if top > 0 else err


def solve(spec: ConstOperatorSpec, F: Spectrum, tol_zero: float = TOL_ZERO,
          grid: int | None = None) -> tuple[Spectrum, SolveDiagnostics]:
    """Solve ``Pu = f`` mode pair by mode pair.

    Nondegenerate pairs use the closed-form Cramer solution in bulk; the
    remaining pairs go through :func:`solve_mode` in lexicographic order of
    their representatives. Incompatible data raises
    :class:`IncompatibilityError` carrying every certificate.
    """
    if F.n != spec.n:
        raise DomainError(f"spectrum dimension {F.n} != operator dimension {spec.n}")
    K = F.K
    pts = F.frequencies().reshape(-1, F.n)
    norms = np.linalg.norm(pts, axis=1)
    f = F.coeffs.reshape(-1)
    f_minus = F.reflected().reshape(-1)
    plus = _symbol_pts(spec, pts.astype(float)) - spec.A
    minus = np.conj(_symbol_pts(spec, pts.astype(float), -1.0)) - np.conj(spec.A)
    delta = plus * minus - abs(spec.B) ** 2
    ok = np.abs(delta) > _zero_threshold(spec, norms, tol_zero)
    zero_idx = np.flatnonzero(~np.any(pts, axis=1))
    ok[zero_idx] = False
    u = np.zeros_like(f)
    u[ok] = (minus[ok] * f[ok] + spec.B * np.conj(f_minus[ok])) / delta[ok]

    diag = SolveDiagnostics()
    index = {tuple(int(v) for v in p): i for i, p in enumerate(pts)} if (~ok).any() else {}
    for i in np.flatnonzero(~ok):
        xi = tuple(int(v) for v in pts[i])
        if xi != mg.canonical(xi):
            continue
        res = solve_mode(spec, xi, f[i], f_minus[i], tol_zero)
        if isinstance(res, Certificate):
            diag.certificates.append(res)
            continue
        if not res.unique:
            diag.nonunique.append(xi)
        u[i] = res.uplus
        u[index[tuple(-v for v in xi)]] = res.uminus
    diag.certificates.sort(key=lambda c: c.xi)
    diag.nonunique.sort()
    if diag.certificates:
        names = ", ".join(str(c.xi) for c in diag.certificates)
        raise IncompatibilityError(f"right-hand side violates compatibility at {names}", diag.certificates)
    U = Spectrum(F.n, K, u.reshape(F.coeffs.shape))
    diag.grid = grid if grid is not None else max(2 * K + 2, 32)
    diag.rel_residual = relative_residual(spec, U, F, diag.grid)
    return U, diag


# -- condition scans -------------------------------------------------------


@dataclass
class SolvabilityReport:
    xi_max: float
    gamma_floor: float
    zero_set: list[tuple[int, ...]]
    curves: dict
    trends: dict
    verdict: str
    witnesses: list[tuple[int, ...]] = field(default_factory=list)

    @property
    def C_eps(self) -> dict:
        return {eps: (math.exp(t.log_C) if t.log_C < 700 else math.inf) for eps, t in self.trends.items()}

    def to_json(self) -> dict:
        return {
            "xi_max": self.xi_max,
            "gamma_floor": self.gamma_floor,
            "verdict": self.verdict,
            "zero_set": [list(x) for x in self.zero_set],
            "witnesses": [list(x) for x in self.witnesses],
            "per_eps": [
                {
                    "eps": eps,
                    "verdict": t.verdict,
                    "log_C": t.log_C,
                    "C": self.C_eps[eps],
                    "inner_min": t.inner_min,
                    "outer_min": t.outer_min,
                    "witnesses": [list(x) for x in t.witnesses],
                    "witness_log_margins": t.witness_margins,
                }
                for eps, t in self.trends.items()
            ],
        }

    def margins_csv(self) -> str:
        return margins_csv(self.curves)


def margins_csv(curves: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["eps", "shell_radius", "min_log_margin"])
    for eps, curve in curves.items():
        for r, m in curve.rows():
            writer.writerow([repr(float(eps)), r, repr(m)])
    return buf.getvalue()


def _overall(trends: dict, degenerate: bool) -> tuple[str, list]:
    if degenerate:
        return mg.DEGENERATE, []
    failed = [t for t in trends.values() if t.verdict == mg.FAIL]
    if not failed:
        return mg.PASS, []
    seen = []
    for t in failed:
        for w in t.witnesses:
            if w not in seen:
                seen.append(w)
    return mg.FAIL, sorted(seen, key=lambda w: (sum(v * v for v in w), w))


def check_dc_m(spec: ConstOperatorSpec, ws: WeightSequence, eps_list: Sequence[float], xi_max: float,
               gamma_floor: float = 1.0, tol_zero: float = TOL_ZERO,
               slack: float = mg.DEFAULT_SLACK) -> SolvabilityReport:
    """Finite-range scan of ``|Delta_xi| >= C_eps inf_j m_j j!/(eps (1+|xi|))^j``.

    The margin is ``log|Delta_xi| - log inf_j(...)``. Its trend across
    ``gamma_floor <= |xi| <= xi_max`` gives the verdict; see
    :func:`margins.trend_verdict`.
    """
    if not xi_max >= gamma_floor >= 1:
        raise DomainError("need xi_max >= gamma_floor >= 1")
    if not len(eps_list):
        raise DomainError("eps_list must be nonempty")
    pts = mg.lattice_ball(spec.n, xi_max)
    norms = np.linalg.norm(pts, axis=1)
    mag, zero = _refined_abs(spec, pts, norms, tol_zero)
    omega = [tuple(int(v) for v in p) for p in pts[zero]]
    rng = norms >= gamma_floor - 1e-9
    degenerate = bool(np.any(zero & rng))
    with np.errstate(divide="ignore"):
        log_abs = np.log(mag[rng])
    pts_r, norms_r = pts[rng], norms[rng]
    curves, trends = {}, {}
    for eps in eps_list:
        margin = log_abs - log_assoc_inf_array(ws, float(eps), 1.0 + norms_r)
        curves[float(eps)] = mg.shell_minima(norms_r, margin)
        trends[float(eps)] = mg.trend_verdict(pts_r, norms_r, margin, gamma_floor, xi_max, slack)
    verdict, witnesses = _overall(trends, degenerate)
    if degenerate:
        witnesses = [mg.canonical(p) for p in pts[zero & rng]]
        witnesses = sorted(set(witnesses), key=lambda w: (sum(v * v for v in w), w))
    return SolvabilityReport(float(xi_max), float(gamma_floor), omega, curves, trends, verdict, witnesses)


@dataclass
class SmoothReport:
    xi_max: float
    zero_set: list[tuple[int, ...]]
    min_margin: dict
    holds: dict
    verdict: str
    best_gamma: float | None

    def to_json(self) -> dict:
        return {
            "xi_max": self.xi_max,
            "verdict": self.verdict,
            "best_gamma": self.best_gamma,
            "zero_set": [list(x) for x in self.zero_set],
            "per_gamma": [{"gamma": g, "min_log_margin": self.min_margin[g], "holds": self.holds[g]}
                          for g in self.min_margin],
        }


def check_smooth_dc(spec: ConstOperatorSpec, gamma_list: Iterable[float], xi_max: float,
                    gamma_floor: float = 1.0, tol_zero: float = TOL_ZERO) -> SmoothReport:
    """Scan ``|xi| >= max(gamma, gamma_floor) => |Delta_xi| >= (1+|xi|)^-gamma``."""
    pts = mg.lattice_ball(spec.n, xi_max)
    norms = np.linalg.norm(pts, axis=1)
    mag, zero = _refined_abs(spec, pts, norms, tol_zero)
    omega = [tuple(int(v) for v in p) for p in pts[zero]]
    with np.errstate(divide="ignore"):
        log_abs = np.log(mag)
    min_margin, holds = {}, {}
    degenerate = False
    for gamma in gamma_list:
        gamma = float(gamma)
        rng = norms >= max(gamma, gamma_floor) - 1e-9
        if not rng.any():
            min_margin[gamma], holds[gamma] = math.inf, True
            continue
        margin = log_abs[rng] + gamma * np.log1p(norms[rng])
        min_margin[gamma] = float(margin.min())
        holds[gamma] = bool(margin.min() >= 0.0)
        degenerate = degenerate or bool(np.any(zero & rng))
    passing = [g for g, ok in holds.items() if ok]
    if passing:
        verdict = mg.PASS
    elif degenerate:
        verdict = mg.DEGENERATE
    else:
        verdict = mg.FAIL
    return SmoothReport(float(xi_max), omega, min_margin, holds, verdict, min(passing) if passing else None)


def smooth_implies_m_check(spec: ConstOperatorSpec, ws: WeightSequence, gamma: int, eps: float,
                           xi_max: float, slack: float = 1e-9) -> bool:
    """Check ``(1+|xi|)^-gamma >= C_eps inf_j(...)`` with ``C_eps = eps^gamma/(m_gamma gamma!)``.

    The inequality depends on ``xi`` only through ``|xi|``, so each distinct
    norm in the ball is tested once.
    """
    if int(gamma) != gamma or gamma < 0:
        raise DomainError("gamma must be a nonnegative integer")
    gamma = int(gamma)
    pts = mg.lattice_ball(spec.n, xi_max)
    norms = np.sqrt(np.unique(np.einsum("ij,ij->i", pts, pts)).astype(float))
    t = 1.0 + norms
    log_C = gamma * math.log(eps) - float(ws.log_m(gamma)) - math.lgamma(gamma + 1)
    lhs = -gamma * np.log(t)
    rhs = log_C + log_assoc_inf_array(ws, eps, t)
    return bool(np.all(lhs >= rhs - slack * (1.0 + np.abs(lhs))))


# -- witnesses, presets, classification ------------------------------------


def build_obstruction(spec: ConstOperatorSpec, omega0: Iterable, variant: str = "delta") -> Spectrum:
    """Right-hand side ``sum Delta_xi e^{i xi.x}`` or ``sum (sigma(xi) - A) e^{i xi.x}``."""
    omega0 = [tuple(int(v) for v in xi) for xi in omega0]
    if not omega0:
        raise DomainError("obstruction needs a nonempty frequency set")
    if variant not in ("delta", "sigma"):
        raise DomainError(f"unknown obstruction variant {variant!r}")
    K = max(max(abs(v) for v in xi) for xi in omega0)
    out = Spectrum.zeros(spec.n, K)
    for xi in omega0:
        if variant == "delta":
            out[xi] = discriminant(spec, xi)
        else:
            out[xi] = symbol(spec, xi) - spec.A
    return out


def _unit(n: int, j: int, k: int) -> tuple[int, ...]:
    alpha = [0] * n
    alpha[j] = k
    return tuple(alpha)


def laplace(n: int, A: complex = 0, B: complex = 0) -> ConstOperatorSpec:
    return ConstOperatorSpec(n, {_unit(n, j, 2): 1.0 for j in range(n)}, A, B)


def heat(n: int, eta: float, A: complex = 0, B: complex = 0) -> ConstOperatorSpec:
    """``d/dt - eta^2 Laplacian_x`` on ``T^{n+1}`` with ``t`` first."""
    if not eta > 0:
        raise DomainError("eta must be positive")
    terms = {_unit(n + 1, 0, 1): 1.0}
    terms.update({_unit(n + 1, j, 2): -eta * eta for j in range(1, n + 1)})
    return ConstOperatorSpec(n + 1, terms, A, B)


def wave(n: int, eta: float, A: complex = 0, B: complex = 0) -> ConstOperatorSpec:
    """``d^2/dt^2 - eta^2 Laplacian_x`` on ``T^{n+1}`` with ``t`` first."""
    if not eta > 0:
        raise DomainError("eta must be positive")
    terms = {_unit(n + 1, 0, 2): 1.0}
    terms.update({_unit(n + 1, j, 2): -eta * eta for j in range(1, n + 1)})
    return ConstOperatorSpec(n + 1, terms, A, B)


def vector_field(C: Sequence[complex], A: complex = 0, B: complex = 0) -> ConstOperatorSpec:
    """``d/dt + sum C_j d/dx_j`` on ``T^{n+1}`` with ``t`` first."""
    n = len(C)
    terms = {_unit(n + 1, 0, 1): 1.0}
    for j, c in enumerate(C, start=1):
        if c != 0:
            terms[_unit(n + 1, j, 1)] = complex(c)
    return ConstOperatorSpec(n + 1, terms, A, B)


_PRESETS = {"laplace": laplace, "heat": heat, "wave": wave, "vector_field": vector_field}


def preset(name: str, **kwargs) -> ConstOperatorSpec:
    """Build a named preset: ``laplace(n)``, ``heat(n, eta)``, ``wave(n, eta)``, ``vector_field(C)``."""
    if name not in _PRESETS:
        raise DomainError(f"unknown preset {name!r}; choose from {sorted(_PRESETS)}")
    if name == "vector_field" and "C" in kwargs:
        kwargs["C"] = [_complex_from(c) for c in kwargs["C"]]
    for key in ("A", "B"):
        if key in kwargs:
            kwargs[key] = _complex_from(kwargs[key])
    return _PRESETS[name](**kwargs)


@dataclass
class ClassVerdict:
    """Which sufficient condition matched (``None`` if none did)."""

    matched: int | None
    solvable: bool | None
    notes: list[str] = field(default_factory=list)
    dc_report: SolvabilityReport | None = None
    mu_estimate: float | None = None
    closed_form_error: float | None = None

    def to_json(self) -> dict:
        out = {"matched": self.matched, "solvable": self.solvable, "notes": list(self.notes)}
        if self.mu_estimate is not None:
            out["mu_estimate"] = self.mu_estimate
        if self.closed_form_error is not None:
            out["closed_form_error"] = self.closed_form_error
        if self.dc_report is not None:
            out["dc_scan"] = self.dc_report.to_json()
        return out


def _surrogate_of(eta: float | DiophantineNumber) -> DiophantineNumber:
    if isinstance(eta, DiophantineNumber):
        return eta
    # continued fraction of the float itself, cut before the rounding tail
    x = Fraction(float(eta))
    quotients = []
    while len(quotients) < 40:
        a = math.floor(x)
        quotients.append(int(a))
        frac = x - a
        if frac == 0:
            break
        x = 1 / frac
        if DiophantineNumber(tuple(quotients)).convergents()[-1][1] > 10 ** 7:
            break
    return DiophantineNumber(tuple(quotients), f"float({float(eta)!r})")


def classify_wave(A: complex, B: complex, eta: float | DiophantineNumber, ws: WeightSequence, xi_max: float,
                  n: int = 1, eps_list: Sequence[float] = (0.01, 0.1, 1.0), mu_cap: float = 4.0,
                  always_scan: bool = False) -> ClassVerdict:
    """Match the wave operator against its three sufficient conditions.

    The non-Liouville part of condition (2) is judged from the local
    irrationality exponents of the continued-fraction surrogate, which is
    evidence on a finite range only.
    """
    A, B = complex(A), complex(B)
    num = _surrogate_of(eta)
    value = num.value
    out = ClassVerdict(None, None)
    out.mu_estimate = num.irrationality_estimate()
    tol = 1e-12 * (1.0 + abs(A) + abs(B))
    if abs(B) < abs(A.imag) - tol:
        out.matched, out.solvable = 1, True
        out.notes.append("condition (1): |B| < |Im A|")
    else:
        algebraic = abs(abs(A) - abs(B)) <= tol and abs(A.real) <= tol
        non_liouville = num.is_non_liouville_on_range(mu_cap)
        out.notes.append(f"condition (2) algebraic part {'holds' if algebraic else 'fails'}")
        out.notes.append(f"irrationality exponent estimate {out.mu_estimate:.4g} "
                         f"({'non-Liouville' if non_liouville else 'Liouville-like'} on range, cap {mu_cap:g})")
        if algebraic and non_liouville:
            out.matched, out.solvable = 2, True
    if out.matched is None or always_scan:
        report = check_dc_m(wave(n, value, A, B), ws, eps_list, xi_max)
        out.dc_report = report
        if out.matched is None:
            if report.verdict == mg.PASS:
                out.matched, out.solvable = 3, True
                out.notes.append("condition (3): scan passes on range")
            else:
                out.solvable = False
                out.notes.append(f"no condition matched; scan verdict {report.verdict}")
    return out


def vector_field_discriminant(C: Sequence[complex], A: complex, B: complex, pts) -> np.ndarray:
    """Closed form ``-|tau + xi.C|^2 + |A|^2 - |B|^2 - 2i Re(A(tau + xi.conj C))``; rows ``(tau, xi)``."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    C = np.asarray(C, dtype=complex)
    tau, xi = pts[:, 0], pts[:, 1:]
    w = tau + xi @ C
    wbar = tau + xi @ np.conj(C)
    return -np.abs(w) ** 2 + abs(A) ** 2 - abs(B) ** 2 - 2j * np.real(A * wbar)


def classify_vector_field(C: Sequence[complex], A: complex, B: complex, ws: WeightSequence, xi_max: float,
                          eps_list: Sequence[float] = (0.01, 0.1, 1.0)) -> ClassVerdict:
    """Classify ``d/dt + C.d_x - A - B conj``; real ``C`` uses the trichotomy."""
    A, B = complex(A), complex(B)
    C = [complex(c) for c in C]
    spec = vector_field(C, A, B)
    pts = mg.lattice_ball(spec.n, xi_max)
    closed = vector_field_discriminant(C, A, B, pts)
    direct = discriminant(spec, pts)
    err = float(np.max(np.abs(closed - direct) / (1.0 + np.abs(direct))))
    out = ClassVerdict(None, None, closed_form_error=err)
    tol = 1e-12 * (1.0 + abs(A) + abs(B))
    if all(c.imag == 0 for c in C):
        if abs(B) > abs(A) + tol:
            out.matched, out.solvable = 1, True
            out.notes.append("condition (1): |B| > |A|")
        elif abs(B) < abs(A) - tol and abs(A.real) > tol:
            out.matched, out.solvable = 2, True
            out.notes.append("condition (2): |B| < |A| and Re A != 0")
    if out.matched is None:
        report = check_dc_m(spec, ws, eps_list, xi_max)
        out.dc_report = report
        if report.verdict == mg.PASS:
            out.matched, out.solvable = 3, True
            out.notes.append("condition (3): scan passes on range")
        else:
            out.solvable = False
            out.notes.append(f"scan verdict {report.verdict}")
    return out
