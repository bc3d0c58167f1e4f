"""Truncated fractional Gaussian free field: Brownian coefficient paths and the
half-time field / bump used to build the explicit non-normalisability drift.

Randomness is counter based. Each independent mode owns a Philox key derived
from ``(seed, mode)``; block ``b`` of samples reads the counter range starting
at ``b``. A given mode therefore draws the same numbers whatever the
truncation, the number of modes or the number of worker threads.
"""
from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy import fft as sfft

from .field import SpectralField, grid_frequencies
from .lattice import FrequencyLattice, bracket_of, sigma_N

__all__ = [
    "BLOCK_SIZE",
    "GaussianPath",
    "BumpSpec",
    "independent_modes",
    "sample_Y",
    "iter_blocks",
    "map_blocks",
    "build_Z_M",
    "kappa_M",
    "build_f_M",
    "bump_profile",
    "fast_grid",
]

BLOCK_SIZE = 2000
_KEY_BASE = 1 << 20


def fast_grid(bandwidth_degree: int) -> int:
    """FFT-friendly grid side holding polynomials of degree ``bandwidth_degree`` without aliasing."""
    return sfft.next_fast_len(bandwidth_degree + 1)


def independent_modes(lat: FrequencyLattice) -> np.ndarray:
    """Modes in ``{0}`` plus the half lattice whose last nonzero component is positive.

    Returns shape ``(n_modes, d)`` with the zero mode first.
    """
    freqs = lat.frequencies().reshape(lat.d, -1).T
    keep = []
    for n in freqs:
        nz = np.nonzero(n)[0]
        if nz.size == 0 or n[nz[-1]] > 0:
            keep.append(n)
    modes = np.array(keep, dtype=np.int64)
    order = np.lexsort(tuple(np.abs(modes).T[::-1]) + (np.max(np.abs(modes), axis=1),))
    return modes[order]


def _mode_key(n) -> int:
    key = 0
    for i, c in enumerate(n):
        key += (int(c) + _KEY_BASE) * (2 * _KEY_BASE) ** i
    return key


@lru_cache(maxsize=65536)
def _philox_key(seed: int, mode_key: int) -> tuple:
    state = np.random.SeedSequence(seed, spawn_key=(mode_key,)).generate_state(2, np.uint64)
    return int(state[0]), int(state[1])


def _mode_normals(seed: int, n, block: int, shape) -> np.ndarray:
    key = np.array(_philox_key(int(seed), _mode_key(n)), dtype=np.uint64)
    counter = np.array([0, 0, block, 0], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key, counter=counter))
    return gen.standard_normal(shape)


@dataclass
class GaussianPath:
    """Brownian coefficients ``B_n(t)`` for a block of independent samples.

    ``values`` has shape ``(n_times, n_samples, n_modes)``; only the modes
    returned by :func:`independent_modes` are stored, the others follow from
    ``B_{-n} = conj(B_n)``. The zero mode is real.
    """

    lattice: FrequencyLattice
    times: np.ndarray
    values: np.ndarray
    modes: np.ndarray
    seed: int
    block: int = 0

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]

    def time_index(self, t: float) -> int:
        hits = np.nonzero(np.isclose(self.times, t, rtol=0, atol=1e-12))[0]
        if hits.size == 0:
            raise ValueError(f"time {t} is not on the path skeleton")
        return int(hits[0])

    def coefficients(self, j: int, G: int, M: int | None = None, power: float | None = None) -> np.ndarray:
        """FFT-layout coefficients ``B_n(t_j) <n>^(-power)`` for ``|n|_inf <= M``.

        ``power`` defaults to ``alpha`` (the field ``Y_N(t_j)``).
        """
        lat = self.lattice
        if power is None:
            power = lat.alpha
        modes = self.modes
        vals = self.values[j]
        if M is not None:
            sel = np.max(np.abs(modes), axis=1) <= M
            modes, vals = modes[sel], vals[:, sel]
        weight = bracket_of(modes.T) ** (-power)
        out = np.zeros((vals.shape[0],) + (G,) * lat.d, dtype=complex)
        pos = tuple(np.mod(modes[:, i], G) for i in range(lat.d))
        neg = tuple(np.mod(-modes[:, i], G) for i in range(lat.d))
        coef = vals * weight
        out[(slice(None),) + neg] = np.conj(coef)
        out[(slice(None),) + pos] = coef
        return out

    def field(self, j: int = -1, G: int | None = None, M: int | None = None) -> SpectralField:
        """``Y_N(t_j)`` (or its ``pi_M`` truncation) as a batched field."""
        N = self.lattice.N if M is None else min(M, self.lattice.N)
        if G is None:
            G = 4 * self.lattice.N + 1
        return SpectralField(self.lattice.d, N, self.coefficients(j % len(self.times), G, M))

    # checkpoint: int64 n_times, float64 times, then one SpectralField record per time
    def to_bytes(self, sample: int = 0, G: int | None = None) -> bytes:
        head = struct.pack("<q", len(self.times)) + np.asarray(self.times, dtype="<f8").tobytes()
        body = b""
        for j in range(len(self.times)):
            f = self.field(j, G)
            body += SpectralField(f.d, f.N, f.coeffs[sample]).to_bytes()
        return head + body


def load_path_fields(data: bytes):
    """Inverse of :meth:`GaussianPath.to_bytes`: ``(times, [SpectralField, ...])``."""
    (n_times,) = struct.unpack_from("<q", data, 0)
    times = np.frombuffer(data, dtype="<f8", offset=8, count=n_times).copy()
    offset = 8 + 8 * n_times
    fields = []
    for _ in range(n_times):
        d, N, G = struct.unpack_from("<3q", data, offset)
        size = SpectralField.nbytes(d, G)
        fields.append(SpectralField.from_bytes(data[offset: offset + size]))
        offset += size
    return times, fields


def sample_Y(lat: FrequencyLattice, times, seed: int, n_samples: int = 1, block: int = 0) -> GaussianPath:
    """Sample Brownian coefficient paths on the time skeleton ``times``.

    Increments of each mode over consecutive times are independent complex
    Gaussians with ``E|dB|^2 = dt`` (real and imaginary parts each of variance
    ``dt / 2``); the zero mode is a real Brownian motion.
    """
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise ValueError("need at least one time")
    if times[0] <= 0 or times[-1] > 1 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be sorted inside (0, 1]")
    dt = np.diff(times, prepend=0.0)
    root = np.sqrt(dt)[:, None]
    modes = independent_modes(lat)
    values = np.empty((times.size, n_samples, len(modes)), dtype=complex)
    for i, n in enumerate(modes):
        xi = _mode_normals(seed, n, block, (times.size, n_samples, 2))
        if not n.any():
            inc = xi[..., 0] * root
        else:
            inc = (xi[..., 0] + 1j * xi[..., 1]) * (root / math.sqrt(2.0))
        values[:, :, i] = np.cumsum(inc, axis=0)
    return GaussianPath(lat, times, values, modes, int(seed), block)


def _block_sizes(n_samples: int, block_size: int):
    full, rest = divmod(n_samples, block_size)
    return [block_size] * full + ([rest] if rest else [])


def iter_blocks(lat, times, n_samples: int, seed: int, block_size: int = BLOCK_SIZE):
    for b, size in enumerate(_block_sizes(n_samples, block_size)):
        yield sample_Y(lat, times, seed, size, b)


def map_blocks(fn, lat, times, n_samples: int, seed: int, threads: int = 1, block_size: int = BLOCK_SIZE) -> list:
    """``[fn(path_b) for each block b]`` in block order, optionally threaded.

    Results depend only on ``(seed, n_samples, block_size)``, never on ``threads``.
    """
    sizes = _block_sizes(n_samples, block_size)

    def work(b):
        return fn(sample_Y(lat, times, seed, sizes[b], b))

    if threads <= 1 or len(sizes) <= 1:
        return [work(b) for b in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, range(len(sizes))))


# -- half-time field Z_M ---------------------------------------------------

def kappa_M(lat: FrequencyLattice) -> float:
    """``E[Z_M(x)^2]`` with ``M = lat.N``: half the bracket sum (``B_n(1/2)`` has variance 1/2)."""
    if lat.N < 1:
        raise ValueError("M must be at least 1")
    return 0.5 * sigma_N(lat)


def build_Z_M(path: GaussianPath, M: int, G: int | None = None) -> SpectralField:
    """``Z_M = sum_{|n|_inf <= M} B_n(1/2) <n>^(-alpha) e_n`` for every sample in the block."""
    if M > path.lattice.N:
        raise ValueError(f"M={M} exceeds the path truncation N={path.lattice.N}")
    try:
        j = path.time_index(0.5)
    except ValueError:
        raise ValueError("path has no sample at t = 1/2") from None
    return path.field(j, G, M)


# -- deterministic bump f_M ------------------------------------------------

def bump_profile(r, inner: float = 0.5, outer: float = 1.0):
    """``exp(-1/(1 - z^2))`` with ``z`` mapping ``(inner, outer)`` onto ``(-1, 1)``; zero elsewhere."""
    r = np.asarray(r, dtype=float)
    z = (2.0 * r - (inner + outer)) / (outer - inner)
    inside = (np.abs(z) < 1.0)
    zz = np.where(inside, z, 0.0)
    return np.where(inside, np.exp(-1.0 / (1.0 - zz**2)), 0.0)


_SPHERE = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}


@lru_cache(maxsize=None)
def _profile_norm(d: int, inner: float, outer: float) -> float:
    """Constant ``c`` with ``int_{R^d} (c g(|xi|))^2 dxi = 1``."""
    val, _ = integrate.quad(lambda r: bump_profile(r, inner, outer) ** 2 * r ** (d - 1),
                            inner, outer, epsabs=0, epsrel=1e-13, limit=200)
    return 1.0 / math.sqrt(_SPHERE[d] * val)


def default_inner_radius(d: int) -> float:
    # (1/2, 1] has no zero-sum frequency triples in one dimension; a wide
    # support is needed so that int f_M^3 beats the kinetic cost of the drift
    return 0.05 if d == 1 else 0.5


@dataclass(frozen=True)
class BumpSpec:
    """Frequency profile of ``f``: even, nonnegative, supported in ``inner < |xi| <= outer``."""

    M: int
    d: int = 1
    inner: float | None = None
    outer: float = 1.0

    @property
    def inner_radius(self) -> float:
        return default_inner_radius(self.d) if self.inner is None else self.inner

    def fhat(self, xi) -> np.ndarray:
        """``f^(xi)`` for frequency vectors stacked along axis 0."""
        r = np.sqrt(np.sum(np.asarray(xi, dtype=float) ** 2, axis=0))
        return _profile_norm(self.d, self.inner_radius, self.outer) * bump_profile(r, self.inner_radius, self.outer)


def build_f_M(spec: BumpSpec, lat: FrequencyLattice, G: int | None = None) -> SpectralField:
    """``f_M = M^(-d/2) sum_n f^(n/M) e_n``: real, deterministic, frequency support near ``|n| ~ M``."""
    M, d = spec.M, lat.d
    if spec.d != d:
        raise ValueError("bump and lattice dimensions differ")
    if M < 2:
        raise ValueError("M must be at least 2")
    if M > lat.N:
        raise ValueError(f"M={M} exceeds the lattice truncation N={lat.N}")
    if G is None:
        G = 4 * lat.N + 1
    freqs = grid_frequencies(G, d)
    coeffs = M ** (-d / 2.0) * spec.fhat(freqs / M)
    if not np.any(coeffs):
        raise ValueError(f"annulus contains no lattice points at M={M}")
    return SpectralField(d, M, coeffs.astype(complex))
