"""Band-limited real fields on the unit torus and the norms measured on them.

A :class:`SpectralField` stores the Fourier coefficients ``c(n)`` of
``u(x) = sum_n c(n) exp(2 pi i n.x)`` on a ``G^d`` grid in numpy FFT layout.
Leading axes are batch axes, so a block of Monte Carlo samples is one field.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import fft as sfft

__all__ = [
    "SpectralField",
    "NormRequest",
    "grid_frequencies",
    "min_grid",
    "transform",
    "integrate_product",
    "heat_smooth",
    "norm",
    "lp_norm",
    "sobolev_norm",
    "holder_norm",
    "a_norm",
    "bump",
    "lp_blocks",
    "default_t_grid",
]


def min_grid(bandwidth: int) -> int:
    """Smallest odd grid side that represents a degree-``bandwidth`` polynomial exactly."""
    return 2 * bandwidth + 1


def grid_frequencies(G: int, d: int) -> np.ndarray:
    """Integer frequencies of a ``G^d`` grid in FFT layout, shape ``(d, G, ..., G)``."""
    axis = np.fft.fftfreq(G, 1.0 / G).round().astype(np.int64)
    return np.stack(np.meshgrid(*([axis] * d), indexing="ij"))


def _axes(d: int) -> tuple:
    return tuple(range(-d, 0))


@dataclass(frozen=True)
class SpectralField:
    """Real trigonometric polynomial of degree ``N`` sampled on a ``G^d`` grid.

    ``coeffs`` has shape ``batch + (G,)*d``; coefficients outside
    ``|n|_inf <= N`` must vanish and ``coeffs(-n) = conj(coeffs(n))``.
    """

    d: int
    N: int
    coeffs: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        c = self.coeffs
        if c.ndim < self.d:
            raise ValueError("coefficient array has fewer axes than the dimension")
        G = c.shape[-1]
        if any(s != G for s in c.shape[-self.d:]):
            raise ValueError(f"grid must be cubic, got shape {c.shape[-self.d:]}")
        if G < min_grid(self.N):
            raise ValueError(f"grid side {G} cannot hold degree {self.N}; need >= {min_grid(self.N)}")

    @property
    def G(self) -> int:
        return self.coeffs.shape[-1]

    @property
    def batch_shape(self) -> tuple:
        return self.coeffs.shape[: -self.d]

    @classmethod
    def from_real(cls, values: np.ndarray, d: int, N: int) -> "SpectralField":
        """Build from grid samples; the values are projected onto ``|n|_inf <= N``."""
        G = values.shape[-1]
        coeffs = sfft.fftn(values, axes=_axes(d)) / G**d
        coeffs = coeffs * (np.max(np.abs(grid_frequencies(G, d)), axis=0) <= N)
        return cls(d, N, coeffs)

    @classmethod
    def from_function(cls, coeff_fn, d: int, N: int, G: int) -> "SpectralField":
        """Coefficients ``coeff_fn(freqs)`` on the box, zero outside."""
        freqs = grid_frequencies(G, d)
        inside = np.max(np.abs(freqs), axis=0) <= N
        coeffs = np.where(inside, coeff_fn(freqs), 0.0).astype(complex)
        return cls(d, N, coeffs)

    def to_real(self) -> np.ndarray:
        return transform(self, "to_real")

    def regrid(self, G: int) -> "SpectralField":
        """Same polynomial sampled on a ``G^d`` grid."""
        if G < min_grid(self.N):
            raise ValueError(f"grid side {G} cannot hold degree {self.N}")
        old = grid_frequencies(self.G, self.d)
        out = np.zeros(self.batch_shape + (G,) * self.d, dtype=complex)
        box = np.max(np.abs(old), axis=0) <= self.N
        src = tuple(old[i][box] for i in range(self.d))
        idx_old = tuple(np.mod(s, self.G) for s in src)
        idx_new = tuple(np.mod(s, G) for s in src)
        out[(Ellipsis,) + idx_new] = self.coeffs[(Ellipsis,) + idx_old]
        return SpectralField(self.d, self.N, out)

    def hermitian_defect(self) -> float:
        """``max |c(n) - conj(c(-n))|``; zero for real fields."""
        flipped = np.roll(np.flip(self.coeffs, axis=_axes(self.d)), 1, axis=_axes(self.d))
        return float(np.max(np.abs(self.coeffs - np.conj(flipped)), initial=0.0))

    def scale(self, factor) -> "SpectralField":
        factor = np.asarray(factor)
        factor = factor.reshape(factor.shape + (1,) * self.d)
        return SpectralField(self.d, self.N, self.coeffs * factor)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        if other.G != self.G or other.d != self.d:
            raise ValueError("fields live on different grids")
        return SpectralField(self.d, max(self.N, other.N), self.coeffs + other.coeffs)

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.d, self.N, -self.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return self + (-other)

    def multiply(self, symbol: np.ndarray) -> "SpectralField":
        """Apply a real Fourier multiplier given on the FFT-layout grid."""
        return SpectralField(self.d, self.N, self.coeffs * symbol)

    def truncate(self, M: int) -> "SpectralField":
        """Sharp projection onto ``|n|_inf <= M``."""
        box = np.max(np.abs(grid_frequencies(self.G, self.d)), axis=0) <= M
        return SpectralField(self.d, min(self.N, M), self.coeffs * box)

    # binary layout: little-endian int64 header (d, N, G), then float64
    # (re, im) pairs in row-major order over ascending frequencies
    def to_bytes(self) -> bytes:
        if self.batch_shape:
            raise ValueError("only single fields serialise")
        centred = np.fft.fftshift(self.coeffs)
        body = np.ascontiguousarray(centred, dtype="<c16").tobytes()
        return struct.pack("<3q", self.d, self.N, self.G) + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "SpectralField":
        d, N, G = struct.unpack_from("<3q", data, 0)
        body = np.frombuffer(data, dtype="<c16", offset=24, count=G**d)
        coeffs = np.fft.ifftshift(body.reshape((G,) * d)).astype(complex)
        return cls(int(d), int(N), coeffs)

    @staticmethod
    def nbytes(d: int, G: int) -> int:
        return 24 + 16 * G**d


def transform(field: SpectralField, direction: str) -> np.ndarray:
    """Grid values of the series (``to_real``) or its coefficient array (``to_fourier``).

    The pair is normalised so that a constant coefficient ``c`` maps to the
    constant grid ``c``; the round trip is the identity.
    """
    axes = _axes(field.d)
    G = field.G
    if direction == "to_real":
        return sfft.ifftn(field.coeffs, axes=axes).real * G**field.d
    if direction == "to_fourier":
        return field.coeffs
    raise ValueError(f"unknown direction {direction!r}")


def integrate_product(fields) -> np.ndarray:
    """Exact ``int_{T^d} prod_i f_i dx`` for at most three band-limited fields.

    The grid mean of a trigonometric polynomial of degree ``D`` is its zero
    mode whenever ``G > D``, so no aliasing reaches the integral.
    """
    fields = list(fields)
    if not 1 <= len(fields) <= 3:
        raise ValueError("integrate_product takes one to three fields")
    d, G = fields[0].d, fields[0].G
    if any(f.d != d or f.G != G for f in fields):
        raise ValueError("fields must share dimension and grid")
    degree = sum(f.N for f in fields)
    if G < degree + 1:
        raise ValueError(f"grid side {G} aliases a degree-{degree} product; need >= {degree + 1}")
    prod = fields[0].to_real()
    for f in fields[1:]:
        prod = prod * f.to_real()
    return prod.mean(axis=_axes(d))


def heat_symbol(G: int, d: int, t) -> np.ndarray:
    """``exp(-4 pi^2 |n|^2 t)`` on the FFT grid; ``t`` may be an array (leading axes)."""
    n2 = np.sum(grid_frequencies(G, d).astype(float) ** 2, axis=0)
    t = np.asarray(t, dtype=float)
    return np.exp(-4.0 * math.pi**2 * t.reshape(t.shape + (1,) * d) * n2)


def heat_smooth(field: SpectralField, t: float) -> SpectralField:
    if not t > 0:
        raise ValueError(f"heat time must be positive, got {t}")
    return field.multiply(heat_symbol(field.G, field.d, t))


# -- Littlewood-Paley machinery ---------------------------------------------

_INNER, _OUTER = 1.25, 1.6


def _smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def bump(r):
    """Radial cutoff: 1 on ``[0, 5/4]``, 0 beyond ``8/5``, smooth and nonincreasing."""
    r = np.abs(np.asarray(r, dtype=float))
    return _smooth_step((_OUTER - r) / (_OUTER - _INNER))


def lp_blocks(G: int, d: int, j_max: int | None = None) -> list:
    """Symbols ``phi_j`` (FFT layout) for ``j = 0..j_max``; they sum to one on the grid."""
    r = np.sqrt(np.sum(grid_frequencies(G, d).astype(float) ** 2, axis=0))
    if j_max is None:
        j_max = max(0, math.ceil(math.log2(max(r.max(), 1.0) / _INNER)))
    blocks = [bump(r)]
    for j in range(1, j_max + 1):
        blocks.append(bump(r / 2**j) - bump(r / 2 ** (j - 1)))
    return blocks


# -- norms -----------------------------------------------------------------

def default_t_grid(N: int | None = None, per_decade: int = 4) -> np.ndarray:
    """Log-spaced times in ``(0, 1]`` reaching below the heat scale of degree ``N``.

    The smallest time satisfies ``4 pi^2 N^2 t = 0.01`` so the top frequency is
    essentially unsmoothed; without ``N`` the grid stops at ``1e-4``.
    """
    t_min = 1e-4 if N is None else min(1e-4, 0.01 / (4.0 * math.pi**2 * max(N, 1) ** 2))
    points = max(2, int(math.ceil(-math.log10(t_min) * per_decade)) + 1)
    return np.geomspace(t_min, 1.0, points)


@dataclass(frozen=True)
class NormRequest:
    """What to measure. ``kind`` is one of Lp, Sobolev, Holder, Anorm."""

    kind: str
    p: float = 2.0
    s: float = 0.0
    eps: float = 0.01
    t_grid: tuple | None = None
    q_blocks: int | None = None
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in ("Lp", "Sobolev", "Holder", "Anorm"):
            raise ValueError(f"unsupported norm kind {self.kind!r}")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.t_grid is not None and (len(self.t_grid) == 0 or max(self.t_grid) > 1
                                        or min(self.t_grid) <= 0):
            raise ValueError("t_grid must be nonempty inside (0, 1]")
        if self.kind == "Anorm" and self.alpha is None:
            raise ValueError("Anorm needs alpha")


def lp_norm(field: SpectralField, p: float) -> np.ndarray:
    vals = np.abs(field.to_real())
    axes = _axes(field.d)
    if math.isinf(p):
        return vals.max(axis=axes)
    return np.mean(vals**p, axis=axes) ** (1.0 / p)


def sobolev_norm(field: SpectralField, s: float) -> np.ndarray:
    brk2 = 1.0 + np.sum(grid_frequencies(field.G, field.d).astype(float) ** 2, axis=0)
    return np.sqrt(np.sum(brk2**s * np.abs(field.coeffs) ** 2, axis=_axes(field.d)))


def holder_norm(field: SpectralField, s: float, j_max: int | None = None) -> np.ndarray:
    """``max_j 2^(sj) ||phi_j(D) u||_inf`` with sup norms taken on the grid."""
    best = None
    for j, phi in enumerate(lp_blocks(field.G, field.d, j_max)):
        if not phi.any():
            continue
        block = 2.0 ** (s * j) * lp_norm(field.multiply(phi), math.inf)
        best = block if best is None else np.maximum(best, block)
    return best


def a_norm(field: SpectralField, alpha: float, eps: float = 0.01, t_grid=None) -> np.ndarray:
    """``max_t t^(alpha - d/6 - eps) ||p_t * u||_{L^3}`` over a log grid of times.

    The default grid is ``default_t_grid(field.N)``.
    """
    if t_grid is None:
        t_grid = default_t_grid(field.N)
    s = alpha - field.d / 6.0 - eps
    axes = _axes(field.d)
    best = None
    for t in t_grid:
        vals = sfft.ifftn(field.coeffs * heat_symbol(field.G, field.d, t), axes=axes).real
        vals *= field.G**field.d
        l3 = np.mean(np.abs(vals) ** 3, axis=axes) ** (1.0 / 3.0)
        cur = t**s * l3
        best = cur if best is None else np.maximum(best, cur)
    return best


def norm(field: SpectralField, req: NormRequest) -> np.ndarray:
    if req.kind == "Lp":
        return lp_norm(field, req.p)
    if req.kind == "Sobolev":
        return sobolev_norm(field, req.s)
    if req.kind == "Holder":
        return holder_norm(field, req.s, req.q_blocks)
    return a_norm(field, req.alpha, req.eps, req.t_grid)
