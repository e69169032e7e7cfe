"""Wavelet coefficients of the random series and their synthesis on the torus.

The basis functions are the periodized wavelets
``Psi_{j,k}(x) = sum_m psi(2^j (x + m) - k)``, so that ``2^{j/2} Psi_{j,k}``
together with the constant function is an orthonormal basis of L^2 of the
torus. Their Fourier coefficients are

    Psi_{j,k}^(n) = 2^{-j} exp(-2 pi i n k / 2^j) psi^(2 pi n / 2^j),

which makes synthesis and analysis exact discrete Fourier computations for
a band-limited ``psi``: on a grid of ``N >= 2^{J+2}`` points nothing aliases.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, DomainError, RangeError
from .tree import TreeSample

DEFAULT_GUARD = 4
MIN_GUARD = 2


# ----------------------------------------------------------------------------
# wavelet


def _smooth_step(x):
    """C-infinity transition: 0 for x <= 0, 1 for x >= 1."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0) ** 2), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0) ** 2), 0.0)
    return a / (a + b)


class MeyerWavelet:
    """Meyer wavelet with a C-infinity smooth step; band ``2pi/3 <= |xi| <= 8pi/3``."""

    name = "meyer"
    regularity = math.inf
    band = (2 * math.pi / 3, 8 * math.pi / 3)

    def hat(self, xi):
        """Fourier transform ``psi^(xi) = int psi(t) exp(-i xi t) dt``."""
        xi = np.asarray(xi, dtype=float)
        a = np.abs(xi)
        out = np.zeros(xi.shape, dtype=complex)
        lo = (a >= 2 * np.pi / 3) & (a <= 4 * np.pi / 3)
        hi = (a > 4 * np.pi / 3) & (a <= 8 * np.pi / 3)
        mag = np.zeros(xi.shape)
        mag[lo] = np.sin(np.pi / 2 * _smooth_step(3 * a[lo] / (2 * np.pi) - 1))
        mag[hi] = np.cos(np.pi / 2 * _smooth_step(3 * a[hi] / (4 * np.pi) - 1))
        nz = lo | hi
        out[nz] = np.exp(0.5j * xi[nz]) * mag[nz]
        return out

    def describe(self):
        return {"name": self.name, "regularity": "inf"}


WAVELETS = {"meyer": MeyerWavelet}


def get_wavelet(name_or_obj="meyer"):
    if not isinstance(name_or_obj, str):
        return name_or_obj
    try:
        return WAVELETS[name_or_obj]()
    except KeyError as exc:
        raise ConfigurationError(f"unknown wavelet {name_or_obj!r}") from exc


def _freqs(N):
    return np.fft.fftfreq(N, d=1.0 / N)


@lru_cache(maxsize=256)
def _level_filter(wavelet_name, j, N):
    """Band indices and ``psi^(2 pi n / 2^j)`` on them for an N-point grid."""
    w = get_wavelet(wavelet_name)
    n = _freqs(N)
    xi = 2 * np.pi * n / 2.0 ** j
    lo, hi = w.band
    idx = np.flatnonzero((np.abs(xi) >= lo) & (np.abs(xi) <= hi))
    vals = w.hat(xi[idx])
    idx.setflags(write=False)
    vals.setflags(write=False)
    return idx, vals


def _filter(wavelet, j, N):
    if wavelet.name in WAVELETS and type(wavelet) is WAVELETS[wavelet.name]:
        return _level_filter(wavelet.name, j, N)
    n = _freqs(N)
    xi = 2 * np.pi * n / 2.0 ** j
    h = wavelet.hat(xi)
    idx = np.flatnonzero(h != 0)
    return idx, h[idx]


# ----------------------------------------------------------------------------
# coefficients


@dataclass(frozen=True)
class CoefficientField:
    """Per-level coefficient arrays ``values[j]`` of length ``2^j``.

    ``states`` (when present) are the tree bits the values were built from.
    ``t`` is the total order of the fractional-integration surrogate already
    applied; ``base`` holds the values before it, so repeated applications
    compose exactly.
    """

    J: int
    base: tuple
    h_low: float
    h_high: float
    states: tuple | None = None
    t: float = 0.0

    @property
    def exponents(self):
        return self.h_low + self.t, self.h_high + self.t

    def values(self, j: int) -> np.ndarray:
        if not 0 <= j <= self.J:
            raise RangeError(f"level {j} outside [0, {self.J}]")
        if self.t == 0.0:
            return self.base[j]
        return self.base[j] * 2.0 ** (-self.t * j)

    def __iter__(self):
        return (self.values(j) for j in range(self.J + 1))

    def large(self, j: int) -> np.ndarray:
        """Offsets carrying the large value at level ``j``."""
        if self.states is not None:
            return np.flatnonzero(self.states[j])
        target = 2.0 ** (-self.h_low * j)
        return np.flatnonzero(self.base[j] == target)

    @classmethod
    def from_arrays(cls, arrays, h_low=float("nan"), h_high=float("nan")):
        base = tuple(np.asarray(a, dtype=float) for a in arrays)
        for j, a in enumerate(base):
            if a.shape != (1 << j,):
                raise ConfigurationError(f"level {j} must hold {1 << j} values, got {a.shape}")
        return cls(len(base) - 1, base, h_low, h_high)


def coefficient_values(bits: np.ndarray, j: int, h_low: float, h_high: float) -> np.ndarray:
    """Large value ``2^{-h_low j}`` on state 1, small value ``2^{-h_high j}`` on state 0."""
    big = 2.0 ** (-h_low * j)
    small = 1.0 if j == 0 else (0.0 if math.isinf(h_high) else 2.0 ** (-h_high * j))
    return np.where(bits == 1, big, small)


def coefficients(tree: TreeSample, h_low: float, h_high: float) -> CoefficientField:
    if not (0 < h_low < h_high):
        raise ConfigurationError(f"need 0 < h_low < h_high, got h_low={h_low!r}, h_high={h_high!r}")
    states = tuple(tree.bits(j) for j in range(tree.J + 1))
    base = tuple(coefficient_values(b, j, h_low, h_high) for j, b in enumerate(states))
    return CoefficientField(tree.J, base, float(h_low), float(h_high), states)


def fractional_integrate(coeffs: CoefficientField, t: float) -> CoefficientField:
    """Scale level ``j`` by ``2^{-t j}``: the wavelet-domain surrogate of order-``t`` integration."""
    if t < 0:
        raise DomainError(f"fractional integration order must be >= 0, got {t!r}")
    return CoefficientField(coeffs.J, coeffs.base, coeffs.h_low, coeffs.h_high, coeffs.states, coeffs.t + t)


# ----------------------------------------------------------------------------
# synthesis / analysis


@dataclass(frozen=True)
class SamplePath:
    N: int
    values: np.ndarray
    J: int
    wavelet: str
    h_low: float
    h_high: float
    tail_bound: float
    meta: dict = field(default_factory=dict)

    @property
    def grid(self):
        return np.arange(self.N) / self.N

    def sidecar(self) -> dict:
        return {
            "N": self.N,
            "J": self.J,
            "wavelet": self.wavelet,
            "h_low": _num(self.h_low),
            "h_high": _num(self.h_high),
            "tail_bound": _num(self.tail_bound),
            **self.meta,
        }

    def to_csv(self) -> str:
        lines = ["x,value"]
        lines += [f"{x!r},{v!r}" for x, v in zip(self.grid.tolist(), self.values.tolist())]
        return "\n".join(lines) + "\n"

    def save_csv(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_csv())

    def save_raw(self, path):
        """Little-endian float64 values plus a JSON sidecar ``<path>.json``."""
        with open(path, "wb") as fh:
            fh.write(self.values.astype("<f8").tobytes())
        with open(str(path) + ".json", "w") as fh:
            json.dump(self.sidecar(), fh, sort_keys=True, indent=1)
            fh.write("\n")

    @classmethod
    def load_raw(cls, path):
        with open(str(path) + ".json") as fh:
            side = json.load(fh)
        vals = np.fromfile(path, dtype="<f8")
        meta = {k: v for k, v in side.items() if k not in ("N", "J", "wavelet", "h_low", "h_high", "tail_bound")}
        return cls(side["N"], vals, side["J"], side["wavelet"], _unnum(side["h_low"]),
                   _unnum(side["h_high"]), _unnum(side["tail_bound"]), meta)


def _num(x):
    if x is None:
        return None
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _unnum(x):
    return float(x) if isinstance(x, str) else x


def _check_grid(N, J, guard):
    m = int(N).bit_length() - 1
    if N <= 0 or (1 << m) != N:
        raise ConfigurationError(f"grid size N={N} is not a power of two")
    if guard < MIN_GUARD:
        raise ConfigurationError(f"guard {guard} < {MIN_GUARD} aliases the top level")
    if m < J + guard:
        raise RangeError(f"grid 2^{m} too coarse for J={J} with guard {guard} (need m >= {J + guard})")
    return m


@lru_cache(maxsize=8)
def _sum_abs_constant(wavelet_name):
    """``sup_t sum_k |psi(t - k)|``, from a finely sampled periodized wavelet."""
    w = get_wavelet(wavelet_name)
    j, N = 6, 1 << 15
    idx, h = _filter(w, j, N)
    spec = np.zeros(N, dtype=complex)
    spec[idx] = 2.0 ** (-j) * h
    one = np.fft.ifft(spec).real * N
    # the 2^j translates of Psi_{j,0} are cyclic shifts by N / 2^j samples
    return float(np.abs(one.reshape(1 << j, N >> j)).sum(axis=0).max())


def tail_bound(h_low: float, J: int, wavelet="meyer") -> float:
    """Sup-norm bound on the omitted levels ``j > J`` when every coefficient is at most ``2^{-h_low j}``."""
    w = get_wavelet(wavelet)
    K = _sum_abs_constant(w.name) if w.name in WAVELETS else float("nan")
    return K * 2.0 ** (-h_low * (J + 1)) / (1.0 - 2.0 ** (-h_low))


def check_regularity(wavelet, h_high, probe_ceiling=None):
    need = probe_ceiling if math.isinf(h_high) else h_high
    if need is not None and not wavelet.regularity > need:
        raise ConfigurationError(
            f"wavelet {wavelet.name!r} has regularity {wavelet.regularity} <= {need}: exponents unresolvable")


def synthesize(coeffs: CoefficientField, wavelet="meyer", N: int | None = None,
               guard: int = DEFAULT_GUARD, probe_ceiling: float | None = None) -> SamplePath:
    """Evaluate ``sum_{j<=J} sum_k C_{j,k} Psi_{j,k}`` on the grid ``k/N``."""
    w = get_wavelet(wavelet)
    J = coeffs.J
    N = 1 << (J + guard) if N is None else int(N)
    _check_grid(N, J, guard)
    h_low, h_high = coeffs.exponents
    if not math.isnan(h_high):
        check_regularity(w, h_high, probe_ceiling)
    spec = np.zeros(N, dtype=complex)
    n = _freqs(N).astype(np.int64)
    for j in range(J + 1):
        c = coeffs.values(j)
        if not c.any():
            continue
        idx, h = _filter(w, j, N)
        F = np.fft.fft(c)
        spec[idx] += 2.0 ** (-j) * h * F[n[idx] % (1 << j)]
    vals = np.fft.ifft(spec).real * N
    tb = tail_bound(h_low, J, w) if not math.isnan(h_low) else float("nan")
    return SamplePath(N, vals, J, w.name, h_low, h_high, tb)


def analyze(path, wavelet="meyer", J: int | None = None, guard: int = MIN_GUARD) -> CoefficientField:
    """Coefficients ``c_{j,k} = 2^j <R, Psi_{j,k}>`` for ``j <= J``.

    ``path`` is a :class:`SamplePath` or a plain array of grid values.
    """
    w = get_wavelet(wavelet)
    vals = path.values if isinstance(path, SamplePath) else np.asarray(path, dtype=float)
    N = vals.size
    if J is None:
        J = path.J if isinstance(path, SamplePath) else int(N).bit_length() - 1 - DEFAULT_GUARD
    _check_grid(N, J, guard)
    Rhat = np.fft.fft(vals) / N
    n = _freqs(N).astype(np.int64)
    out = []
    for j in range(J + 1):
        idx, h = _filter(w, j, N)
        G = np.zeros(1 << j, dtype=complex)
        np.add.at(G, n[idx] % (1 << j), Rhat[idx] * np.conj(h))
        out.append(np.fft.ifft(G).real * (1 << j))
    h_low = path.h_low if isinstance(path, SamplePath) else float("nan")
    h_high = path.h_high if isinstance(path, SamplePath) else float("nan")
    return CoefficientField(J, tuple(out), h_low, h_high)


def wavelet_on_grid(j: int, k: int, N: int, wavelet="meyer") -> np.ndarray:
    """Grid values of the single periodized wavelet ``Psi_{j,k}``."""
    arrays = [np.zeros(1 << m) for m in range(j + 1)]
    arrays[j][k] = 1.0
    return synthesize(CoefficientField.from_arrays(arrays), wavelet, N, guard=MIN_GUARD).values
