"""Potentials, Monte Carlo partition functions and the N-scans built on them.

All estimators draw ``Y_N(1)`` directly from the truncated Gaussian measure
and average ``exp(-V_N)``; weights are handled in log space because the
renormalisation constant can be in the hundreds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field, replace

import numpy as np
from scipy.special import logsumexp

from .field import a_norm
from .gff import fast_grid, map_blocks
from .lattice import FrequencyLattice, beta_N as beta_closed_form, pair_correlation_sum, sigma_N
from .wick import hermite

__all__ = [
    "PotentialParams",
    "Estimate",
    "regime_of",
    "make_params",
    "potential_observables",
    "eval_V_N",
    "V_from_observables",
    "estimate_from_log_weights",
    "estimate_Z",
    "estimate_Z_tamed",
    "beta_N_mc",
    "beta_N_step_doubling",
    "singularity_statistic",
    "z_scan",
]

_TOL = 1e-9


def regime_of(d: int, alpha: float) -> str:
    """``regular`` (d < 2a), ``log`` (d = 2a), ``intermediate`` (2a < d < 3a) or ``critical`` (d = 3a)."""
    if d < 2 * alpha - _TOL:
        return "regular"
    if abs(d - 2 * alpha) <= _TOL * max(1.0, d):
        return "log"
    if d < 3 * alpha - 1e-6:
        return "intermediate"
    if abs(d - 3 * alpha) <= 1e-6:
        return "critical"
    raise ValueError(f"d={d}, alpha={alpha} lies beyond the critical line d = 3 alpha")


def default_gamma(d: int, alpha: float) -> float:
    reg = regime_of(d, alpha)
    if reg == "regular":
        return 1.5
    if reg == "log":
        return 2.1
    return d / (d - 2.0 * alpha)


@dataclass(frozen=True)
class PotentialParams:
    """Coupling constants of ``V_N`` and of the tamed potential ``W_{N,delta}``.

    ``wick=False`` replaces Wick powers by plain powers (only meaningful in
    the regular regime ``d < 2 alpha``).
    """

    d: int
    alpha: float
    N: int
    sigma: float
    A: float = 1.0
    gamma: float = 1.5
    beta_N: float = 0.0
    delta: float = 0.0
    q: int = 20
    wick: bool = True
    eps: float = 0.01

    def __post_init__(self):
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")
        if self.A < 0:
            raise ValueError("A must be nonnegative")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.q % 2 or self.q <= 0:
            raise ValueError("q must be a positive even integer")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        # validates d, alpha, N
        FrequencyLattice(self.d, self.N, self.alpha)

    @property
    def lattice(self) -> FrequencyLattice:
        return FrequencyLattice(self.d, self.N, self.alpha)

    @property
    def regime(self) -> str:
        return regime_of(self.d, self.alpha)

    def with_N(self, N: int) -> "PotentialParams":
        """Same couplings at truncation ``N``; a nonzero ``beta_N`` is recomputed."""
        beta = beta_closed_form(FrequencyLattice(self.d, N, self.alpha), self.sigma) if self.beta_N else 0.0
        return replace(self, N=N, beta_N=beta)


def make_params(d: int, alpha: float, N: int, sigma: float, A: float = 1.0, gamma: float | None = None,
                delta: float = 0.0, q: int = 20, beta: bool | None = None, eps: float = 0.01) -> PotentialParams:
    """Parameters following the regime table.

    ``gamma`` defaults to 1.5 for d < 2a, 2.1 for d = 2a and d/(d - 2a) above;
    plain powers are used for d < 2a; ``beta_N`` is switched on only at
    d = 3a unless ``beta`` says otherwise.
    """
    reg = regime_of(d, alpha)
    if gamma is None:
        gamma = default_gamma(d, alpha)
    if beta is None:
        beta = reg == "critical"
    lat = FrequencyLattice(d, N, alpha)
    b = beta_closed_form(lat, sigma) if beta else 0.0
    return PotentialParams(d, alpha, N, sigma, A, gamma, b, delta, q, wick=reg != "regular", eps=eps)


@dataclass
class Estimate:
    """Monte Carlo estimate with provenance.

    ``log_mean`` / ``log_stderr`` carry the same estimate in log space (delta
    method); ``mom_log_mean`` is the median-of-means companion.
    """

    mean: float
    stderr: float
    n_samples: int
    seed: int
    estimator: str = "plain"
    log_mean: float = float("nan")
    log_stderr: float = float("nan")
    mom_log_mean: float = float("nan")
    flags: list = dc_field(default_factory=list)

    @property
    def flag_text(self) -> str:
        return ";".join(self.flags)


def potential_observables(u_values: np.ndarray, params: PotentialParams, anorm_field=None) -> dict:
    """Per-sample ``I2 = int :u^2:``, ``I3 = int :u^3:`` (plain powers if ``wick`` is off).

    ``u_values`` are grid values at ``t = 1`` with trailing ``d`` spatial axes;
    the grid must exceed ``3 N`` points per side for exact cubic integrals.
    """
    axes = tuple(range(-params.d, 0))
    sig = sigma_N(params.lattice) if params.wick else 0.0
    out = {
        "I2": hermite(2, u_values, sig).mean(axis=axes),
        "I3": hermite(3, u_values, sig).mean(axis=axes),
    }
    if anorm_field is not None:
        out["anorm"] = a_norm(anorm_field, params.alpha, params.eps)
    return out


def V_from_observables(obs: dict, params: PotentialParams, tamed: bool = False) -> np.ndarray:
    """``-(sigma/3) I3 + A |I2|^gamma + beta_N`` (+ ``delta ||u||_A^q`` when tamed)."""
    with np.errstate(over="ignore", invalid="ignore"):
        V = -(params.sigma / 3.0) * obs["I3"] + params.A * np.abs(obs["I2"]) ** params.gamma + params.beta_N
        if tamed:
            V = V + params.delta * obs["anorm"] ** params.q
    return V


def eval_V_N(u, params: PotentialParams) -> np.ndarray:
    """``V_N(u)`` for a (batched) :class:`SpectralField` truncated to ``params.N``."""
    if u.N > params.N:
        raise ValueError(f"field bandwidth {u.N} exceeds N={params.N}")
    if u.G < 3 * u.N + 1:
        u = u.regrid(fast_grid(3 * u.N))
    obs = potential_observables(u.to_real(), params)
    V = V_from_observables(obs, params)
    if np.any(np.isnan(V)):
        raise FloatingPointError("V_N overflowed; |sigma| too large for this sample")
    return V


def _sample_observables(params: PotentialParams, n_samples: int, seed: int, tamed: bool, threads: int) -> dict:
    lat = params.lattice
    G = fast_grid(3 * lat.N)

    def per_block(path):
        u = path.field(-1, G)
        return potential_observables(u.to_real(), params, u if tamed else None)

    parts = map_blocks(per_block, lat, [1.0], n_samples, seed, threads)
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


def estimate_from_log_weights(logw: np.ndarray, seed: int, estimator: str = "plain", groups: int = 10) -> Estimate:
    """Mean of ``exp(logw)`` with error bars, computed in log space.

    NaN log weights are never dropped silently: an all-NaN batch yields a NaN
    estimate flagged ``divergent``, a partial one is flagged ``overflow``.
    """
    if estimator not in ("plain", "median_of_means"):
        raise ValueError(f"unknown estimator {estimator!r}")
    logw = np.asarray(logw, dtype=float)
    n = logw.size
    flags = []
    bad = np.isnan(logw) | (logw == np.inf)
    if bad.all():
        return Estimate(float("nan"), float("nan"), n, seed, estimator, flags=["divergent"])
    if bad.any():
        flags.append(f"overflow={int(bad.sum())}")
        logw = logw[~bad]
    m = logw.size
    shift = np.max(logw)
    w = np.exp(logw - shift)
    wbar = w.mean()
    rel = float(w.std(ddof=1) / (wbar * math.sqrt(m))) if m > 1 else float("inf")
    log_mean = float(math.log(wbar) + shift)
    top = np.sort(w)[::-1][: max(1, m // 100)]
    if top.sum() > 0.5 * w.sum():
        flags.append("heavy_tail")
    chunks = np.array_split(logw, min(groups, m))
    mom = float(np.median([logsumexp(c) - math.log(c.size) for c in chunks]))
    chosen = mom if estimator == "median_of_means" else log_mean
    with np.errstate(over="ignore"):
        mean = float(np.exp(chosen))
    return Estimate(mean, mean * rel, n, seed, estimator, chosen, rel, mom, flags)


def estimate_Z(params: PotentialParams, n_samples: int, seed: int, estimator: str = "plain",
               threads: int = 1, observables: dict | None = None) -> Estimate:
    """``Z_N = E_mu[exp(-V_N(Y_N))]`` by direct Gaussian sampling."""
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    obs = observables if observables is not None else _sample_observables(params, n_samples, seed, False, threads)
    return estimate_from_log_weights(-V_from_observables(obs, params), seed, estimator)


def estimate_Z_tamed(params: PotentialParams, n_samples: int, seed: int, estimator: str = "plain",
                     threads: int = 1, observables: dict | None = None) -> Estimate:
    """``E_mu[exp(-delta ||Y_N||_A^q - V_N(Y_N))]``."""
    if params.delta <= 0:
        raise ValueError("tamed estimate needs delta > 0")
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    obs = observables if observables is not None else _sample_observables(params, n_samples, seed, True, threads)
    return estimate_from_log_weights(-V_from_observables(obs, params, tamed=True), seed, estimator)


# -- second renormalisation by simulation ----------------------------------

def _beta_integrand(path, G: int) -> np.ndarray:
    """``||<D>^(-2a) pi_N :Y_N^2(t_j):||^2_{H^a}`` for every skeleton time, shape ``(n_times, n_samples)``."""
    from scipy import fft as sfft
    from .field import grid_frequencies

    lat = path.lattice
    d, N = lat.d, lat.N
    axes = tuple(range(-d, 0))
    freqs = grid_frequencies(G, d)
    inside = np.max(np.abs(freqs), axis=0) <= N
    weight = np.where(inside, (1.0 + np.sum(freqs.astype(float) ** 2, axis=0)) ** (-lat.alpha), 0.0)
    sig1 = sigma_N(lat)
    out = np.empty((len(path.times), path.n_samples))
    for j, t in enumerate(path.times):
        vals = path.field(j, G).to_real()
        coef = sfft.fftn(hermite(2, vals, t * sig1), axes=axes) / G**d
        out[j] = np.sum(weight * np.abs(coef) ** 2, axis=axes)
    return out


def _trapezoid_unit(g: np.ndarray, K: int) -> np.ndarray:
    """Trapezoid rule on ``j/K``, ``j = 1..K``, with the integrand vanishing at ``t = 0``."""
    return (g[:-1].sum(axis=0) + 0.5 * g[-1]) / K


def beta_N_step_doubling(params: PotentialParams, n_samples: int, time_steps: int, seed: int,
                         threads: int = 1):
    """``(fine, coarse)`` Monte Carlo estimates of ``beta_N`` on matched paths.

    ``fine`` uses ``time_steps`` steps, ``coarse`` the even skeleton points of
    the same paths (``time_steps / 2`` steps). Returns ``(fine, coarse,
    rel_change, rel_change_stderr)``.
    """
    if time_steps < 16 or time_steps % 2:
        raise ValueError("time_steps must be an even integer >= 16")
    lat = params.lattice
    K = time_steps
    times = np.arange(1, K + 1) / K
    G = fast_grid(3 * lat.N)
    pref = params.sigma**2 / 2.0

    def per_block(path):
        g = _beta_integrand(path, G)
        return _trapezoid_unit(g, K), _trapezoid_unit(g[1::2], K // 2)

    parts = map_blocks(per_block, lat, times, n_samples, seed, threads)
    fine = pref * np.concatenate([p[0] for p in parts])
    coarse = pref * np.concatenate([p[1] for p in parts])
    ests = []
    for x in (fine, coarse):
        m = float(x.mean())
        ests.append(Estimate(m, float(x.std(ddof=1) / math.sqrt(x.size)), n_samples, seed, "plain",
                             flags=[f"time_steps={K if x is fine else K // 2}", "trapezoid"]))
    diff = coarse - fine
    m_f = ests[0].mean
    rel = float(diff.mean() / m_f) if m_f else 0.0
    rel_se = float(diff.std(ddof=1) / math.sqrt(diff.size) / abs(m_f)) if m_f else 0.0
    return ests[0], ests[1], rel, rel_se


def beta_N_mc(params: PotentialParams, n_samples: int, time_steps: int, seed: int, threads: int = 1) -> Estimate:
    """Simulated ``(sigma^2/2) E int_0^1 ||<D>^(-2a) pi_N :Y_N^2(t):||^2_{H^a} dt``.

    Independent of the closed form in :mod:`phi3d.lattice`: paths are sampled
    on ``time_steps`` equal steps and the time integral is a trapezoid sum.
    """
    if time_steps < 16:
        raise ValueError("time_steps must be >= 16")
    if params.sigma == 0:
        return Estimate(0.0, 0.0, n_samples, seed, "plain", flags=[f"time_steps={time_steps}"])
    lat = params.lattice
    K = time_steps
    times = np.arange(1, K + 1) / K
    G = fast_grid(3 * lat.N)
    parts = map_blocks(lambda p: _trapezoid_unit(_beta_integrand(p, G), K), lat, times, n_samples, seed, threads)
    x = params.sigma**2 / 2.0 * np.concatenate(parts)
    return Estimate(float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)), n_samples, seed, "plain",
                    flags=[f"time_steps={K}", "trapezoid"])


# -- scans -----------------------------------------------------------------

@dataclass
class SingularityRow:
    N: int
    statistic: float
    stderr: float
    cubic_exact: float
    cubic_mc: float
    cubic_mc_stderr: float


def singularity_statistic(params: PotentialParams, N_list, n_samples: int, seed: int, threads: int = 1):
    """``(log N)^(-3/4) ||V_N - beta_N||_{L^2(mu)}`` along ``N_list`` on matched seeds.

    Returns ``(rows, passed)``. Each row also carries the cubic part
    ``E((sigma/3) int :u^3:)^2`` both simulated and from the exact sum
    ``(sigma^2/9) * 3! * pair_correlation_sum(k=3)``. The check passes when the
    statistic at the last ``N`` lies more than three combined standard errors
    below the first and no step increases beyond three standard errors.
    """
    if params.regime != "critical":
        raise ValueError("the singularity statistic is defined on the critical line d = 3 alpha")
    rows = []
    for N in N_list:
        p = params.with_N(N)
        obs = _sample_observables(p, n_samples, seed, False, threads)
        centred = V_from_observables(obs, p) - p.beta_N
        sq = centred**2
        m2 = float(sq.mean())
        se2 = float(sq.std(ddof=1) / math.sqrt(sq.size))
        scale = math.log(N) ** -0.75
        stat = scale * math.sqrt(m2)
        se = scale * se2 / (2 * math.sqrt(m2)) if m2 > 0 else 0.0
        cub = (p.sigma / 3.0 * obs["I3"]) ** 2
        exact = p.sigma**2 / 9.0 * 6.0 * pair_correlation_sum(p.lattice, 3)
        rows.append(SingularityRow(N, stat, se, exact, float(cub.mean()),
                                   float(cub.std(ddof=1) / math.sqrt(cub.size))))
    if all(r.statistic == 0 for r in rows):
        return rows, True
    first, last = rows[0], rows[-1]
    drop = first.statistic - last.statistic > 3 * math.hypot(first.stderr, last.stderr)
    steady = all(b.statistic - a.statistic <= 3 * math.hypot(a.stderr, b.stderr) for a, b in zip(rows, rows[1:]))
    return rows, drop and steady


def z_scan(params: PotentialParams, N_list, n_samples: int, seed: int, tamed: bool = False,
           estimator: str = "plain", threads: int = 1) -> list:
    """``[(N, Estimate)]`` for the (tamed) partition function along ``N_list`` on matched seeds."""
    out = []
    for N in N_list:
        p = params.with_N(N)
        fn = estimate_Z_tamed if tamed else estimate_Z
        out.append((N, fn(p, n_samples, seed, estimator, threads)))
    return out


def no_growth(log_means, log_stderrs, k: float = 3.0) -> bool:
    """False only if every consecutive step of ``log_means`` grows by more than ``k`` combined stderrs."""
    steps = [(b - a) > k * math.hypot(sa, sb)
             for a, b, sa, sb in zip(log_means, log_means[1:], log_stderrs, log_stderrs[1:])]
    return not (steps and all(steps))
