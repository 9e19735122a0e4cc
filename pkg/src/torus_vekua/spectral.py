"""Fourier analysis on the torus with the ``(2 pi)^-n`` normalization.

Grids are uniform on ``[0, 2 pi)`` with ``N`` points per axis. Spectra are
stored densely over the box ``[-K, K]^n``; the FFT is only an evaluation
device for the trapezoidal quadrature of the Fourier integral.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .errors import DomainError
from .weightseq import WeightSequence, log_assoc_inf_array


@dataclass
class Spectrum:
    """Finitely supported coefficients ``xi -> c(xi)`` inside ``[-K, K]^n``."""

    n: int
    K: int
    coeffs: np.ndarray
    real: bool = False

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (2 * self.K + 1,) * self.n:
            raise DomainError(f"coefficient array shape {self.coeffs.shape} does not match n={self.n}, K={self.K}")

    @classmethod
    def zeros(cls, n: int, K: int) -> "Spectrum":
        return cls(n, K, np.zeros((2 * K + 1,) * n, dtype=complex))

    @classmethod
    def from_entries(cls, entries: dict, n: int, K: int | None = None) -> "Spectrum":
        if K is None:
            K = max((max(abs(int(v)) for v in xi) for xi in entries), default=0)
        out = cls.zeros(n, K)
        for xi, value in entries.items():
            out[xi] = value
        return out

    def _index(self, xi) -> tuple[int, ...]:
        xi = tuple(int(v) for v in np.atleast_1d(xi))
        if len(xi) != self.n:
            raise DomainError(f"frequency {xi} has wrong dimension for n={self.n}")
        return tuple(v + self.K for v in xi)

    def entry(self, xi) -> complex:
        xi = tuple(int(v) for v in np.atleast_1d(xi))
        if any(abs(v) > self.K for v in xi):
            return 0j
        return complex(self.coeffs[self._index(xi)])

    def __getitem__(self, xi) -> complex:
        return self.entry(xi)

    def __setitem__(self, xi, value) -> None:
        idx = self._index(xi)
        if any(not 0 <= i <= 2 * self.K for i in idx):
            raise DomainError(f"frequency {xi} outside the box of radius {self.K}")
        self.coeffs[idx] = value

    def frequencies(self) -> np.ndarray:
        """Integer frequency grid, shape ``(2K+1,)*n + (n,)``."""
        axes = [np.arange(-self.K, self.K + 1)] * self.n
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.frequencies().astype(float), axis=-1)

    def items(self, tol: float = 0.0) -> Iterator[tuple[tuple[int, ...], complex]]:
        for idx in zip(*np.nonzero(np.abs(self.coeffs) > tol)):
            yield tuple(int(i) - self.K for i in idx), complex(self.coeffs[idx])

    def support(self, tol: float = 0.0) -> list[tuple[int, ...]]:
        return [xi for xi, _ in self.items(tol)]

    def reflected(self) -> np.ndarray:
        """Array whose entry at ``xi`` is ``c(-xi)``."""
        return self.coeffs[(slice(None, None, -1),) * self.n]

    def resized(self, K: int) -> "Spectrum":
        """Copy on a box of radius ``K`` (truncating or zero-padding)."""
        out = Spectrum.zeros(self.n, K)
        r = min(K, self.K)
        src = tuple(slice(self.K - r, self.K + r + 1) for _ in range(self.n))
        dst = tuple(slice(K - r, K + r + 1) for _ in range(self.n))
        out.coeffs[dst] = self.coeffs[src]
        out.real = self.real
        return out

    def to_rows(self, tol: float = 0.0) -> list[dict]:
        return [{"xi": list(xi), "re": c.real, "im": c.imag} for xi, c in self.items(tol)]

    def to_json(self) -> dict:
        return {"n": self.n, "K": self.K, "real": self.real, "entries": self.to_rows()}

    @classmethod
    def from_json(cls, obj) -> "Spectrum":
        rows = obj["entries"] if isinstance(obj, dict) else obj
        if isinstance(obj, dict) and "n" in obj:
            n = int(obj["n"])
        elif rows:
            n = len(rows[0]["xi"])
        else:
            raise DomainError("cannot infer dimension of an empty spectrum")
        entries = {tuple(r["xi"]): complex(r.get("re", 0.0), r.get("im", 0.0)) for r in rows}
        K = obj.get("K") if isinstance(obj, dict) else None
        out = cls.from_entries(entries, n, K)
        out.real = bool(obj.get("real", False)) if isinstance(obj, dict) else False
        return out


@dataclass
class GridFunction:
    """Samples of a function on the uniform ``N^n`` grid of the torus."""

    n: int
    N: int
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.N < 2:
            raise DomainError("grids need N >= 2")
        if self.samples.shape != (self.N,) * self.n:
            raise DomainError(f"sample shape {self.samples.shape} does not match n={self.n}, N={self.N}")

    @classmethod
    def from_function(cls, func, n: int, N: int) -> "GridFunction":
        """Sample ``func(x_1, ..., x_n)`` (broadcasting) on the grid."""
        return cls(n, N, np.asarray(func(*grid(n, N)), dtype=complex) * np.ones((N,) * n))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# " + json.dumps({"n": self.n, "N": self.N}) + "\n")
        writer = csv.writer(buf)
        writer.writerow(["re", "im"])
        for v in self.samples.ravel():
            v = complex(v)
            writer.writerow([repr(v.real), repr(v.imag)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GridFunction":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("#"):
            raise DomainError("grid CSV must start with a '# {\"n\":..,\"N\":..}' header line")
        header = json.loads(lines[0][1:])
        rows = list(csv.DictReader(lines[1:]))
        n, N = int(header["n"]), int(header["N"])
        data = np.array([complex(float(r["re"]), float(r["im"])) for r in rows])
        if data.size != N ** n:
            raise DomainError(f"grid CSV has {data.size} samples, expected {N ** n}")
        return cls(n, N, data.reshape((N,) * n))


@dataclass
class PartialSpectrum:
    """Coefficients ``xi -> f(t, xi)`` for ``xi`` in ``[-K, K]^q``, sampled in ``t``.

    ``values`` has shape ``(Nt,)*p + (2K+1,)*q``.
    """

    p: int
    q: int
    Nt: int
    K: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        expected = (self.Nt,) * self.p + (2 * self.K + 1,) * self.q
        if self.values.shape != expected:
            raise DomainError(f"values shape {self.values.shape}, expected {expected}")

    def mode(self, xi) -> np.ndarray:
        """t-grid samples of the coefficient at ``xi``."""
        xi = tuple(int(v) for v in np.atleast_1d(xi))
        if any(abs(v) > self.K for v in xi):
            return np.zeros((self.Nt,) * self.p, dtype=complex)
        return self.values[(Ellipsis,) + tuple(v + self.K for v in xi)]

    def frequencies(self) -> np.ndarray:
        axes = [np.arange(-self.K, self.K + 1)] * self.q
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def copy(self, values=None) -> "PartialSpectrum":
        return PartialSpectrum(self.p, self.q, self.Nt, self.K, self.values.copy() if values is None else values)


def grid(n: int, N: int) -> list[np.ndarray]:
    """Open-mesh coordinates of the uniform grid on ``[0, 2 pi)^n``."""
    x = 2 * np.pi * np.arange(N) / N
    shape = [1] * n
    out = []
    for axis in range(n):
        s = list(shape)
        s[axis] = N
        out.append(x.reshape(s))
    return out


def wavenumbers(N: int) -> np.ndarray:
    """Integer wavenumbers in FFT order, Nyquist set to zero for even ``N``."""
    k = np.fft.fftfreq(N, 1.0 / N)
    if N % 2 == 0:
        k[N // 2] = 0.0
    return k


def _fft_to_box(a: np.ndarray, axis: int, N: int) -> np.ndarray:
    K = N // 2
    idx = np.arange(-K, K + 1) % N
    b = np.take(a, idx, axis=axis)
    if N % 2 == 0:
        edge = [slice(None)] * b.ndim
        for pos in (0, 2 * K):
            edge[axis] = pos
            b[tuple(edge)] *= 0.5
    return b


def _box_to_fft(b: np.ndarray, axis: int, K: int, N: int) -> np.ndarray:
    shape = list(b.shape)
    shape[axis] = N
    a = np.zeros(shape, dtype=complex)
    dst = [slice(None)] * b.ndim
    dst[axis] = np.arange(-K, K + 1) % N
    a[tuple(dst)] = b
    return a


def analyze(f: GridFunction) -> Spectrum:
    """Fourier coefficients of the samples on the box ``K = N // 2``.

    For even ``N`` the Nyquist coefficient is split evenly between ``+K``
    and ``-K`` so that real data yields a conjugate-symmetric spectrum.
    """
    c = np.fft.fftn(f.samples) / f.N ** f.n
    for axis in range(f.n):
        c = _fft_to_box(c, axis, f.N)
    return Spectrum(f.n, f.N // 2, c, real=bool(np.isrealobj(f.samples) or not np.any(np.imag(f.samples))))


def synthesize(S: Spectrum, N: int) -> GridFunction:
    """Evaluate ``sum_xi c(xi) e^{i xi.x}`` on the ``N^n`` grid."""
    if not S.K < N / 2:
        raise DomainError(f"box radius K={S.K} aliases on a grid with N={N}; need K < N/2")
    a = S.coeffs
    for axis in range(S.n):
        a = _box_to_fft(a, axis, S.K, N)
    samples = np.fft.ifftn(a) * N ** S.n
    if S.real:
        samples = samples.real
    return GridFunction(S.n, N, samples)


def partial_analyze(f: GridFunction, p: int = 1) -> PartialSpectrum:
    """Transform in the last ``n - p`` axes only; the first ``p`` axes are ``t``."""
    q = f.n - p
    if q < 1 or p < 1:
        raise DomainError(f"partial transform needs 1 <= p < n, got p={p}, n={f.n}")
    axes = tuple(range(p, f.n))
    c = np.fft.fftn(f.samples, axes=axes) / f.N ** q
    for axis in axes:
        c = _fft_to_box(c, axis, f.N)
    return PartialSpectrum(p, q, f.N, f.N // 2, c)


def partial_synthesize(S: PartialSpectrum, N: int | None = None) -> GridFunction:
    """Inverse of :func:`partial_analyze` onto an ``N``-point grid in ``x``.

    The x-grid must match the t-grid (``N == Nt``) because
    :class:`GridFunction` uses one size per axis. A box with ``K = N/2``
    (as returned by :func:`partial_analyze`) has its split Nyquist halves
    recombined.
    """
    N = S.Nt if N is None else N
    if N != S.Nt:
        raise DomainError("GridFunction needs equal resolution on all axes")
    if not S.K <= N / 2:
        raise DomainError(f"box radius K={S.K} aliases on a grid with N={N}")
    a = S.values
    axes = tuple(range(S.p, S.p + S.q))
    for axis in axes:
        if 2 * S.K == N:
            # fold the split Nyquist halves back onto one slot
            lo = [slice(None)] * a.ndim
            hi = [slice(None)] * a.ndim
            lo[axis], hi[axis] = slice(0, 1), slice(2 * S.K, 2 * S.K + 1)
            a = np.concatenate([a[tuple(lo)] + a[tuple(hi)], np.take(a, np.arange(1, 2 * S.K), axis=axis)],
                               axis=axis)
            a = np.fft.ifftshift(a, axes=axis)
            continue
        a = _box_to_fft(a, axis, S.K, N)
    return GridFunction(S.p + S.q, N, np.fft.ifftn(a, axes=axes) * N ** S.q)


@dataclass
class DeltaBound:
    delta: float
    log_C: float
    log_C_inner: float
    holds: bool

    @property
    def C(self) -> float:
        return math.exp(self.log_C) if self.log_C < 700 else math.inf


@dataclass
class DecayReport:
    bounds: list[DeltaBound]
    consistent: bool
    verdict: str

    def best(self) -> DeltaBound | None:
        holding = [b for b in self.bounds if b.holds]
        return min(holding, key=lambda b: b.log_C) if holding else None


def classify_decay(
    S: Spectrum,
    ws: WeightSequence,
    delta_grid: Iterable[float],
    inner_fraction: float = 0.5,
    slack: float = 1e-9,
) -> DecayReport:
    """Smallest ``C`` with ``|c(xi)| <= C inf_j m_j j!/(delta^j (1+|xi|)^j)`` per ``delta``.

    A bound "holds" when the constant over the whole box is already reached
    inside ``|xi| <= inner_fraction * K``: a constant still growing at the
    box edge indicates a rate the weights cannot dominate.
    """
    mags = np.abs(S.coeffs)
    mask = mags > 0
    if not mask.any():
        raise DomainError("classify_decay needs a nonempty spectrum")
    r = S.norms()[mask]
    logs = np.log(mags[mask])
    inner = r <= inner_fraction * S.K
    bounds = []
    for delta in delta_grid:
        ratio = logs - log_assoc_inf_array(ws, float(delta), 1.0 + r)
        log_C = float(ratio.max())
        log_C_inner = float(ratio[inner].max()) if inner.any() else -math.inf
        bounds.append(DeltaBound(float(delta), log_C, log_C_inner, log_C <= log_C_inner + slack))
    consistent = any(b.holds for b in bounds)
    label = "consistent with E_M on observed range" if consistent else "not consistent with E_M on observed range"
    return DecayReport(bounds, consistent, label)


def energy(f: GridFunction) -> float:
    """Mean of ``|f|^2`` over the grid."""
    return float(np.mean(np.abs(f.samples) ** 2))


def random_spectrum(n: int, K: int, rng: np.random.Generator, real: bool = False, decay: float = 0.0) -> Spectrum:
    """Random coefficients on ``[-K, K]^n``, optionally damped by ``exp(-decay |xi|)``."""
    shape = (2 * K + 1,) * n
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    out = Spectrum(n, K, c)
    if decay:
        out.coeffs *= np.exp(-decay * out.norms())
    if real:
        out.coeffs = 0.5 * (out.coeffs + np.conj(out.reflected()))
        out.real = True
    return out


def iter_box(n: int, K: int) -> Iterator[tuple[int, ...]]:
    return itertools.product(range(-K, K + 1), repeat=n)
