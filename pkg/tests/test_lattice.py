import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phi3d.lattice import (FrequencyLattice, beta_N, check_discrete_convolution, convolution_profile,
                           pair_correlation_sum, sigma_N, wick_square_sobolev_sum)


def brute_pair_sum(lat, k):
    n = range(-lat.N, lat.N + 1)
    total = 0.0
    for tup in itertools.product(itertools.product(n, repeat=lat.d), repeat=k):
        if all(sum(c) == 0 for c in zip(*tup)):
            total += math.prod((1 + sum(x * x for x in v)) ** (-lat.alpha) for v in tup)
    return total


def test_sigma_N_single_term():
    assert sigma_N(FrequencyLattice(1, 0, 0.5)) == 1.0


def test_sigma_N_slope_matches_d_minus_2alpha():
    Ns = [2**j for j in range(6, 13)]
    vals = [sigma_N(FrequencyLattice(1, N, 1 / 3)) for N in Ns]
    slope = np.polyfit(np.log(Ns), np.log(vals), 1)[0]
    assert abs(slope - 1 / 3) <= 0.05


def test_sigma_N_log_regime():
    r = [sigma_N(FrequencyLattice(1, N, 0.5)) / math.log(N) for N in [2**j for j in range(8, 13)]]
    assert max(r) / min(r) < 1.10


@pytest.mark.parametrize("d,alpha", [(1, 1 / 3), (2, 0.7), (3, 1.2)])
def test_sigma_N_strictly_increasing(d, alpha):
    vals = [sigma_N(FrequencyLattice(d, N, alpha)) for N in range(0, 6)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_pair_sum_trivial():
    assert pair_correlation_sum(FrequencyLattice(1, 0, 1.0), 2) == 1.0


def test_pair_sum_nine_term_brute_force():
    lat = FrequencyLattice(1, 1, 1 / 3)
    assert pair_correlation_sum(lat, 2) == pytest.approx(brute_pair_sum(lat, 2), rel=1e-14)


@pytest.mark.parametrize("d,N,alpha", [(1, 4, 1 / 3), (2, 2, 0.6), (3, 1, 1.0)])
def test_pair_sum_k3_brute_force(d, N, alpha):
    lat = FrequencyLattice(d, N, alpha)
    assert pair_correlation_sum(lat, 3) == pytest.approx(brute_pair_sum(lat, 3), rel=1e-12)


def test_pair_sum_rejects_k():
    with pytest.raises(ValueError):
        pair_correlation_sum(FrequencyLattice(1, 2, 1.0), 4)


def test_pair_sum_k3_log_divergence_at_critical_line():
    r = [pair_correlation_sum(FrequencyLattice(1, N, 1 / 3), 3) / math.log(N) for N in [2**j for j in range(4, 11)]]
    assert max(r) / min(r) < 2


def test_pair_sum_k2_bounded_at_critical_line():
    # sum_{|n| > N} (1 + n^2)^(-2/3) < 3 N^(-1/3), so U(N) = S(N) + 6 N^(-1/3)
    # bounds the limit from above and is itself nonincreasing
    Ns = [2**j for j in range(6, 13)]
    vals = np.array([pair_correlation_sum(FrequencyLattice(1, N, 1 / 3), 2) for N in Ns])
    upper = vals + 6 * np.array(Ns, dtype=float) ** (-1 / 3)
    assert np.all(np.diff(vals) > 0)
    assert np.all(np.diff(upper) < 0)
    assert vals.max() < upper.min()


def test_beta_N_zero_and_homogeneity():
    lat = FrequencyLattice(1, 16, 1 / 3)
    assert beta_N(lat, 0.0) == 0.0
    assert beta_N(lat, 3.7) == pytest.approx(3.7**2 * beta_N(lat, 1.0), rel=1e-15)


def test_beta_N_log_type_growth():
    # per-doubling increments rise toward a constant: linear growth in log N
    Ns = [2**j for j in range(4, 13)]
    vals = np.array([beta_N(FrequencyLattice(1, N, 1 / 3), 1.0) for N in Ns])
    inc = np.diff(vals)
    assert np.all(inc > 0)
    assert np.all(np.diff(np.log(inc)) > 0)
    assert np.all(np.diff(np.diff(np.log(inc))) < 0)
    r = vals / np.log(Ns)
    assert r.max() / r.min() < 2


def test_beta_N_matches_sobolev_sum_integral():
    # (sigma^2/2) int t^2 dt * ||:Y^2:||^2_{H^-a} restricted to the box
    lat = FrequencyLattice(1, 12, 1 / 3)
    via_sobolev = 0.5 * (1 / 3) * wick_square_sobolev_sum(lat, -lat.alpha, truncate=True)
    assert beta_N(lat, 1.0) == pytest.approx(via_sobolev, rel=1e-12)


def test_lattice_sums_deterministic():
    lat = FrequencyLattice(2, 20, 0.55)
    assert pair_correlation_sum(lat, 3) == pair_correlation_sum(lat, 3)
    assert beta_N(lat, 1.3) == beta_N(lat, 1.3)


@settings(max_examples=20, deadline=None)
@given(N=st.integers(1, 6), alpha=st.floats(0.2, 2.0))
def test_pair_sum_k2_equals_weight_square_sum(N, alpha):
    lat = FrequencyLattice(1, N, alpha)
    assert pair_correlation_sum(lat, 2) == pytest.approx(float(np.sum(lat.weights() ** 2)), rel=1e-13)


def test_convolution_profile_zero_mode():
    lat = FrequencyLattice(1, 8, 1.0)
    a, b = 0.9, 0.9
    prof = convolution_profile(a, b, lat, 0.1)
    m = np.arange(-32, 33)
    direct = np.sum((1 + m * m) ** (-(a + b) / 2))
    assert prof[lat.N] == pytest.approx(direct, rel=1e-12)


def test_convolution_profile_against_direct_sum():
    lat = FrequencyLattice(1, 5, 1.0)
    a, b, lam = 0.7, 0.6, 0.4
    prof = convolution_profile(a, b, lat, lam)
    m = np.arange(-20, 21)
    for i, n in enumerate(range(-5, 6)):
        direct = (1 + n * n) ** ((a - lam) / 2) * np.sum((1 + m * m) ** (-a / 2) * (1 + (n - m) ** 2) ** (-b / 2))
        assert prof[i] == pytest.approx(direct, rel=1e-12)


def test_discrete_convolution_b_equals_d():
    res = check_discrete_convolution(0.5, 1.0, FrequencyLattice(1, 64, 1.0), [64, 128, 256, 512, 1024], lam=0.05)
    assert res.lam == 0.05
    assert res.passed


def test_discrete_convolution_bounded_geometric_increments():
    # a = b = 0.9: maxima approach their limit like N^(-0.1), so increments
    # shrink by 2^(-0.1) per doubling and the maxima stay bounded
    res = check_discrete_convolution(0.9, 0.9, FrequencyLattice(1, 64, 1.0), [64, 128, 256, 512, 1024])
    assert res.lam == pytest.approx(0.1)
    inc = np.diff(res.maxima)
    assert np.all(inc > 0)
    assert np.allclose(inc[1:] / inc[:-1], 2 ** (-0.1), atol=0.01)
    assert all(r < 1.1 for r in res.ratios[1:])


@pytest.mark.parametrize("a,b", [(0.3, 0.5), (1.0, 0.5), (1.2, 0.5)])
def test_discrete_convolution_preconditions(a, b):
    with pytest.raises(ValueError):
        check_discrete_convolution(a, b, FrequencyLattice(1, 8, 1.0))


def test_discrete_convolution_b_equals_d_needs_lambda():
    with pytest.raises(ValueError):
        check_discrete_convolution(0.5, 1.0, FrequencyLattice(1, 8, 1.0))
