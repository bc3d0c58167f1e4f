"""Spectral Monte Carlo for truncated fractional Phi^3 Gibbs measures on the torus."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from .lattice import FrequencyLattice, beta_N, pair_correlation_sum, sigma_N  # noqa: E402,F401
from .field import SpectralField  # noqa: E402,F401
