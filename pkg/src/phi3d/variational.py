"""Variational (Boue-Dupuis) objective under the shift ``Theta = Upsilon + sigma fZ``.

For an adapted drift ``Theta`` the objective

    E[ V_N(Y_N + Theta_N) + 1/2 int_0^1 ||Theta'(t)||^2_{H^alpha} dt ]

bounds ``-log Z_N`` from above. Writing ``Theta = Upsilon + sigma fZ`` with
``fZ' = <D>^(-2 alpha) pi_N :Y_N^2(t):`` and using that the Wick square is a
martingale in ``t``, the ``:Y^2: Theta`` cross term cancels against the mixed
kinetic term in expectation and the remaining ``sigma^2`` kinetic part is the
closed-form constant ``beta_N``. What is left (the *reduced* form) is

    E[ -sigma int Y Theta^2 - (sigma/3) int Theta^3
       + A |int :Y^2: + 2 Y Theta + Theta^2|^gamma
       + 1/2 int_0^1 ||Upsilon'||^2_{H^alpha} dt ] + (beta_N in V_N) - beta_N(sigma).

The *direct* form evaluates the first display on the time skeleton and serves
as an oracle for the reduction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .field import SpectralField, a_norm, grid_frequencies
from .gff import BumpSpec, build_f_M, build_Z_M, fast_grid, kappa_M, map_blocks
from .gibbs import Estimate, PotentialParams, V_from_observables, potential_observables
from .lattice import beta_N as beta_closed_form, sigma_N
from .wick import hermite

__all__ = [
    "DriftSpec",
    "DriftTerms",
    "fZ_from_path",
    "assemble_theta",
    "bd_samples",
    "eval_bd_objective",
    "ScanReport",
    "classify",
    "strictly_decreasing",
    "scan_nonnormalisability",
]


@dataclass(frozen=True)
class DriftSpec:
    """``kind='zero'`` (``Theta = 0``) or ``kind='explicit_nn'``.

    The explicit drift is ``Upsilon'(t) = 2 * 1{t > 1/2} (-Z_M + sgn(sigma) sqrt(kappa_M) f_M)``.
    ``rule`` picks the quadrature for ``fZ`` on the ``time_steps`` skeleton.
    """

    kind: str = "zero"
    M: int | None = None
    time_steps: int = 64
    rule: str = "trapezoid"
    bump_inner: float | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "explicit_nn"):
            raise ValueError(f"unknown drift kind {self.kind!r}")
        if self.kind == "explicit_nn" and (self.M is None or self.M < 2):
            raise ValueError("explicit drift needs an integer M >= 2")
        if self.time_steps < 2 or self.time_steps % 2:
            raise ValueError("time_steps must be even so that t = 1/2 is on the skeleton")
        if self.rule not in ("trapezoid", "left"):
            raise ValueError("rule must be 'trapezoid' or 'left'")

    @property
    def times(self) -> np.ndarray:
        K = self.time_steps
        return np.arange(1, K + 1) / K


@dataclass
class DriftTerms:
    theta: SpectralField
    upsilon: SpectralField
    fZ: SpectralField


def _sgn(x: float) -> float:
    return float(np.sign(x))


def _check_skeleton(path, K: int):
    want = np.arange(1, K + 1) / K
    if len(path.times) != K or not np.allclose(path.times, want, rtol=0, atol=1e-12):
        raise ValueError(f"path skeleton does not match {K} uniform steps on (0, 1]")


def _wick_square_drifts(path, G: int) -> np.ndarray:
    """``<D>^(-2a) pi_N :Y_N^2(t_j):`` coefficients for every skeleton time, shape ``(K, batch, G...)``."""
    lat = path.lattice
    d, N = lat.d, lat.N
    axes = tuple(range(-d, 0))
    freqs = grid_frequencies(G, d)
    inside = np.max(np.abs(freqs), axis=0) <= N
    # <n>^(-2a) = (1 + |n|^2)^(-a)
    symbol = np.where(inside, (1.0 + np.sum(freqs.astype(float) ** 2, axis=0)) ** (-lat.alpha), 0.0)
    sig1 = sigma_N(lat)
    out = np.empty((len(path.times), path.n_samples) + (G,) * d, dtype=complex)
    for j, t in enumerate(path.times):
        vals = path.field(j, G).to_real()
        out[j] = symbol * sfft.fftn(hermite(2, vals, t * sig1), axes=axes) / G**d
    return out


def _quadrature_weights(K: int, rule: str) -> np.ndarray:
    """Weights on ``W(t_j)``, ``j = 1..K``; ``W(0) = 0`` since ``Y_N(0) = 0``."""
    w = np.full(K, 1.0 / K)
    if rule == "trapezoid":
        w[-1] = 0.5 / K
    else:
        w[-1] = 0.0
    return w


def fZ_from_path(path, time_steps: int, G: int | None = None, rule: str = "trapezoid",
                 drifts: np.ndarray | None = None) -> SpectralField:
    """``fZ_N = int_0^1 <D>^(-2a) pi_N :Y_N^2(t): dt`` by quadrature on the path skeleton."""
    _check_skeleton(path, time_steps)
    lat = path.lattice
    if G is None:
        G = fast_grid(3 * lat.N)
    if drifts is None:
        drifts = _wick_square_drifts(path, G)
    w = _quadrature_weights(time_steps, rule)
    coeffs = np.tensordot(w, drifts, axes=(0, 0))
    return SpectralField(lat.d, lat.N, coeffs)


def _explicit_upsilon(path, M: int, sigma: float, G: int, inner: float | None) -> np.ndarray:
    lat = path.lattice
    Z = build_Z_M(path, M, G).coeffs
    if sigma == 0:
        return -Z
    f = build_f_M(BumpSpec(M, lat.d, inner), lat, G).coeffs
    return -Z + _sgn(sigma) * math.sqrt(kappa_M(lat.with_N(M))) * f


def assemble_theta(drift: DriftSpec, path, params: PotentialParams, G: int | None = None,
                   fZ: SpectralField | None = None) -> DriftTerms:
    """``Theta_N = Upsilon_N + sigma fZ_N`` for every sample of ``path``.

    For the zero drift all three fields vanish. The explicit drift integrates
    in closed form: ``Upsilon_N = int_{1/2}^1 2 (-Z_M + sgn(sigma) sqrt(kappa_M) f_M) dt``.
    """
    lat = path.lattice
    if G is None:
        G = fast_grid(3 * lat.N)
    shape = (path.n_samples,) + (G,) * lat.d
    if drift.kind == "zero":
        zero = SpectralField(lat.d, lat.N, np.zeros(shape, dtype=complex))
        return DriftTerms(zero, zero, zero)
    _check_skeleton(path, drift.time_steps)
    if drift.M > lat.N:
        raise ValueError(f"M={drift.M} exceeds N={lat.N}")
    if fZ is None:
        fZ = fZ_from_path(path, drift.time_steps, G, drift.rule)
    ups = _explicit_upsilon(path, drift.M, params.sigma, G, drift.bump_inner)
    ups_f = SpectralField(lat.d, drift.M, np.broadcast_to(ups, shape).copy())
    theta = SpectralField(lat.d, lat.N, ups_f.coeffs + params.sigma * fZ.coeffs)
    return DriftTerms(theta, ups_f, fZ)


def _h_alpha_sq(coeffs: np.ndarray, G: int, d: int, alpha: float) -> np.ndarray:
    freqs = grid_frequencies(G, d).astype(float)
    weight = (1.0 + np.sum(freqs**2, axis=0)) ** alpha
    return np.sum(weight * np.abs(coeffs) ** 2, axis=tuple(range(-d, 0)))


def _taming_excess(u: SpectralField, params: PotentialParams, cap: float) -> np.ndarray:
    """``delta * (||u||_A^q - min(||u||_A^q, L))``; identically zero when ``L`` is infinite."""
    if params.delta == 0 or math.isinf(cap):
        return np.zeros(u.batch_shape)
    with np.errstate(over="ignore"):
        aq = a_norm(u, params.alpha, params.eps) ** params.q
    return params.delta * np.maximum(aq - cap, 0.0)


def bd_samples(drift: DriftSpec, params: PotentialParams, path, terms: DriftTerms | None = None,
               G: int | None = None, cap: float = math.inf) -> np.ndarray:
    """Per-sample reduced objective; for the zero drift this is ``V_N(Y_N)`` (``W_{N,delta}`` if ``delta > 0``)."""
    lat = path.lattice
    if G is None:
        G = fast_grid(3 * lat.N)
    y = path.field(-1, G)
    if drift.kind == "zero":
        obs = potential_observables(y.to_real(), params, y if params.delta > 0 else None)
        return V_from_observables(obs, params, tamed=params.delta > 0)
    if not params.wick:
        raise ValueError("the shifted objective needs Wick-ordered powers")
    if terms is None:
        terms = assemble_theta(drift, path, params, G)
    axes = tuple(range(-lat.d, 0))
    yv = y.to_real()
    th = terms.theta.to_real()
    s = params.sigma
    with np.errstate(over="ignore", invalid="ignore"):
        th2 = th * th
        cubic = -s * np.mean(yv * th2, axis=axes) - (s / 3.0) * np.mean(th2 * th, axis=axes)
        sq = np.mean(hermite(2, yv, sigma_N(lat)) + 2.0 * yv * th + th2, axis=axes)
        tame = params.A * np.abs(sq) ** params.gamma
        # 1/2 int_{1/2}^1 ||2 Upsilon||^2 dt = ||Upsilon||^2
        kinetic = _h_alpha_sq(terms.upsilon.coeffs, G, lat.d, lat.alpha)
        const = params.beta_N - beta_closed_form(lat, s)
        out = cubic + tame + kinetic + const
    if params.delta > 0 and not math.isinf(cap):
        out = out + _taming_excess(SpectralField(lat.d, lat.N, y.coeffs + terms.theta.coeffs), params, cap)
    return out


def bd_direct_samples(drift: DriftSpec, params: PotentialParams, path, G: int | None = None) -> np.ndarray:
    """Per-sample ``V_N(Y + Theta) + 1/2 sum_j h ||Theta'(t_{j-1})||^2_{H^a}`` with left-point drift.

    Only the expectation matches the reduced form, up to the difference
    between the left-point and exact ``sigma^2`` kinetic constants.
    """
    lat = path.lattice
    if drift.kind != "explicit_nn":
        raise ValueError("direct form is implemented for the explicit drift")
    if G is None:
        G = fast_grid(3 * lat.N)
    K = drift.time_steps
    _check_skeleton(path, K)
    W = _wick_square_drifts(path, G)
    s = params.sigma
    ups = _explicit_upsilon(path, drift.M, s, G, drift.bump_inner)
    # Theta' on (t_{j-1}, t_j] uses W(t_{j-1}); W(0) = 0
    prev = np.concatenate([np.zeros_like(W[:1]), W[:-1]])
    h = 1.0 / K
    theta = ups + s * h * prev.sum(axis=0)
    kinetic = np.zeros(path.n_samples)
    for j in range(K):
        rate = s * prev[j] + (2.0 * ups if (j + 0.5) * h > 0.5 else 0.0)
        kinetic += 0.5 * h * _h_alpha_sq(rate, G, lat.d, lat.alpha)
    u = SpectralField(lat.d, lat.N, path.field(-1, G).coeffs + theta)
    obs = potential_observables(u.to_real(), params)
    return V_from_observables(obs, params) + kinetic


def _estimate(x: np.ndarray, n: int, seed: int, flags) -> Estimate:
    flags = list(flags)
    bad = ~np.isfinite(x)
    if bad.any():
        flags.append(f"overflow={int(bad.sum())}")
        x = x[~bad]
    if x.size < 2:
        return Estimate(float("nan"), float("nan"), n, seed, "plain", flags=flags + ["divergent"])
    return Estimate(float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)), n, seed, "plain", flags=flags)


def eval_bd_objective(drift: DriftSpec, params: PotentialParams, n_samples: int, seed: int,
                      form: str = "reduced", threads: int = 1, cap: float = math.inf) -> Estimate:
    """Monte Carlo value of the variational objective for ``drift``."""
    if form not in ("reduced", "direct"):
        raise ValueError("form must be 'reduced' or 'direct'")
    lat = params.lattice
    G = fast_grid(3 * lat.N)
    times = [1.0] if drift.kind == "zero" else drift.times
    if form == "direct":
        fn = lambda p: bd_direct_samples(drift, params, p, G)  # noqa: E731
    else:
        fn = lambda p: bd_samples(drift, params, p, G=G, cap=cap)  # noqa: E731
    x = np.concatenate(map_blocks(fn, lat, times, n_samples, seed, threads))
    return _estimate(x, n_samples, seed, [form, drift.kind] + ([f"M={drift.M}"] if drift.M else []))


# -- M scan -----------------------------------------------------------------

@dataclass
class ScanCell:
    M: int
    sigma: float
    objective: float
    stderr: float
    diff: float = float("nan")
    diff_stderr: float = float("nan")


@dataclass
class ScanReport:
    cells: list
    classification: dict
    window: tuple
    sensitivity: list


def classify(diffs, diff_stderrs, k: float = 3.0) -> str:
    """``divergent`` if the objective drops between the two largest ``M`` by more than ``k`` standard errors."""
    if len(diffs) == 0:
        return "stable"
    return "divergent" if diffs[-1] < -k * diff_stderrs[-1] else "stable"


def strictly_decreasing(diffs, diff_stderrs, k: float = 3.0) -> bool:
    """Every consecutive difference is below ``-k`` of its standard error."""
    return len(diffs) > 0 and all(dv < -k * se for dv, se in zip(diffs, diff_stderrs))


def crossover_window(classification: dict) -> tuple:
    """``(largest stable |sigma|, smallest divergent |sigma|)``; NaN where absent."""
    stable = [abs(s) for s, c in classification.items() if c == "stable"]
    div = [abs(s) for s, c in classification.items() if c == "divergent"]
    lo = max((s for s in stable if not div or s < min(div)), default=float("nan"))
    return lo, (min(div) if div else float("nan"))


def scan_nonnormalisability(params: PotentialParams, M_list, sigma_list, n_samples: int, seed: int,
                            time_steps: int = 64, deltas=(0.05, 0.1, 0.2), cap: float = math.inf,
                            threads: int = 1, bump_inner: float | None = None) -> ScanReport:
    """Explicit-drift objective on the ``(M, sigma)`` grid with common random numbers.

    Every cell reuses the same Gaussian paths, so consecutive-``M``
    differences are estimated from per-sample differences. ``params.beta_N``
    is replaced by the closed form at each ``sigma``.
    """
    if params.regime != "critical":
        raise ValueError("the non-normalisability scan runs on the critical line d = 3 alpha")
    M_list = sorted(M_list)
    if M_list[-1] > params.N:
        raise ValueError(f"largest M={M_list[-1]} exceeds N={params.N}")
    lat = params.lattice
    G = fast_grid(3 * lat.N)
    K = time_steps
    drift0 = DriftSpec("explicit_nn", M_list[0], K, bump_inner=bump_inner)

    def cell_params(s, delta):
        return PotentialParams(params.d, params.alpha, params.N, s, params.A, params.gamma,
                               beta_closed_form(lat, s), delta, params.q, params.wick, params.eps)

    # with an infinite cap the taming terms cancel and every delta gives the same cell
    computed = deltas if not math.isinf(cap) else deltas[:1]

    def per_block(path):
        fZ = fZ_from_path(path, K, G, drift0.rule)
        out = {}
        for s in sigma_list:
            for delta in computed:
                p = cell_params(s, delta)
                for M in M_list:
                    dr = DriftSpec("explicit_nn", M, K, bump_inner=bump_inner)
                    terms = assemble_theta(dr, path, p, G, fZ)
                    x = bd_samples(dr, p, path, terms, G, cap)
                    for dl in (deltas if computed is not deltas else (delta,)):
                        out[(s, dl, M)] = x
        return out

    parts = map_blocks(per_block, lat, drift0.times, n_samples, seed, threads)
    samples = {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}

    def summarise(delta):
        cells, classes = [], {}
        for s in sigma_list:
            prev = None
            diffs, ses = [], []
            for M in M_list:
                x = samples[(s, delta, M)]
                c = ScanCell(M, s, float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)))
                if prev is not None:
                    dx = x - prev
                    c.diff = float(dx.mean())
                    c.diff_stderr = float(dx.std(ddof=1) / math.sqrt(dx.size))
                    diffs.append(c.diff)
                    ses.append(c.diff_stderr)
                prev = x
                cells.append(c)
            classes[s] = classify(diffs, ses)
        return cells, classes

    main_delta = 0.1 if 0.1 in deltas else deltas[0]
    cells, classes = summarise(main_delta)
    sens = []
    for delta in deltas:
        c2, cl2 = summarise(delta)
        for c in c2:
            sens.append((delta, c.M, c.sigma, c.objective, c.stderr, cl2[c.sigma]))
    return ScanReport(cells, classes, crossover_window(classes), sens)
