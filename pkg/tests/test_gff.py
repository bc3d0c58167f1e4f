import math

import numpy as np
import pytest

from phi3d.field import integrate_product
from phi3d.gff import (BumpSpec, build_f_M, build_Z_M, fast_grid, independent_modes, kappa_M, load_path_fields,
                       map_blocks, sample_Y)
from phi3d.lattice import FrequencyLattice, sigma_N


def mean_se(x):
    x = np.asarray(x, dtype=float)
    return x.mean(), x.std(ddof=1) / math.sqrt(x.size)


def test_independent_modes_cover_half_lattice():
    for d, N in [(1, 3), (2, 2), (3, 1)]:
        lat = FrequencyLattice(d, N, 0.5)
        modes = independent_modes(lat)
        assert len(modes) == (lat.size + 1) // 2
        keys = {tuple(m) for m in modes}
        assert all(tuple(-m) not in keys for m in modes if m.any())


@pytest.mark.parametrize("d,N,alpha", [(1, 16, 1 / 3), (2, 4, 0.7)])
def test_variance_matches_sigma_N(d, N, alpha):
    lat = FrequencyLattice(d, N, alpha)
    path = sample_Y(lat, [0.5, 1.0], seed=3, n_samples=4000)
    y1 = path.field(-1, fast_grid(2 * N))
    m, se = mean_se(integrate_product([y1, y1]))
    assert abs(m - sigma_N(lat)) < 3 * se


def test_time_covariance():
    lat = FrequencyLattice(1, 16, 1 / 3)
    path = sample_Y(lat, [0.25, 0.5, 1.0], seed=5, n_samples=4000)
    G = fast_grid(32)
    y1 = path.field(-1, G)
    for j, t in enumerate((0.25, 0.5)):
        m, se = mean_se(integrate_product([path.field(j, G), y1]))
        assert abs(m - t * sigma_N(lat)) < 3 * se


def test_increments_uncorrelated_with_past():
    lat = FrequencyLattice(1, 16, 1 / 3)
    path = sample_Y(lat, [0.5, 1.0], seed=6, n_samples=4000)
    G = fast_grid(32)
    half = path.field(0, G)
    m, se = mean_se(integrate_product([path.field(1, G) - half, half]))
    assert abs(m) < 3 * se


def test_fields_are_real():
    path = sample_Y(FrequencyLattice(2, 5, 0.6), [1.0], seed=1, n_samples=3)
    assert path.field(-1).hermitian_defect() < 1e-15
    assert np.all(np.isreal(path.values[:, :, 0]))


def test_seed_determinism_and_blocks():
    lat = FrequencyLattice(1, 8, 0.5)
    a = sample_Y(lat, [0.5, 1.0], 9, 5, block=0)
    b = sample_Y(lat, [0.5, 1.0], 9, 5, block=0)
    c = sample_Y(lat, [0.5, 1.0], 9, 5, block=1)
    d = sample_Y(lat, [0.5, 1.0], 10, 5, block=0)
    assert np.array_equal(a.values, b.values)
    assert not np.allclose(a.values, c.values)
    assert not np.allclose(a.values, d.values)


def test_mode_draws_independent_of_truncation():
    small = sample_Y(FrequencyLattice(1, 4, 0.5), [0.5, 1.0], 2, 7)
    big = sample_Y(FrequencyLattice(1, 16, 0.5), [0.5, 1.0], 2, 7)
    G = 33
    assert np.allclose(small.coefficients(1, G), big.coefficients(1, G, M=4), atol=0)


def test_map_blocks_thread_independent():
    lat = FrequencyLattice(1, 8, 0.5)

    def fn(p):
        return p.values[-1].real.sum(axis=1)

    one = np.concatenate(map_blocks(fn, lat, [1.0], 250, 4, threads=1, block_size=100))
    four = np.concatenate(map_blocks(fn, lat, [1.0], 250, 4, threads=4, block_size=100))
    assert one.shape == (250,)
    assert np.array_equal(one, four)


def test_sample_Y_validates_times():
    lat = FrequencyLattice(1, 4, 0.5)
    for times in ([], [0.0, 1.0], [1.0, 0.5], [0.5, 1.5]):
        with pytest.raises(ValueError):
            sample_Y(lat, times, 0)


def test_checkpoint_round_trip():
    path = sample_Y(FrequencyLattice(2, 3, 0.6), [0.5, 1.0], 1, 2)
    times, fields = load_path_fields(path.to_bytes(sample=1))
    assert times.tolist() == [0.5, 1.0]
    for j, f in enumerate(fields):
        assert np.array_equal(f.coeffs, path.field(j).coeffs[1])


def test_Z_M_variance_is_kappa():
    M = 16
    lat = FrequencyLattice(1, 32, 1 / 3)
    path = sample_Y(lat, [0.5, 1.0], 8, 4000)
    z = build_Z_M(path, M, fast_grid(2 * M))
    assert z.N == M
    m, se = mean_se(integrate_product([z, z]))
    assert abs(m - kappa_M(lat.with_N(M))) < 3 * se


def test_Z_M_errors():
    lat = FrequencyLattice(1, 8, 1 / 3)
    with pytest.raises(ValueError):
        build_Z_M(sample_Y(lat, [0.5, 1.0], 0), 16)
    with pytest.raises(ValueError):
        build_Z_M(sample_Y(lat, [0.25, 1.0], 0), 4)
    with pytest.raises(ValueError):
        kappa_M(lat.with_N(0))


def test_kappa_growth_regimes():
    Ms = [2**j for j in range(6, 13)]
    k = [kappa_M(FrequencyLattice(1, M, 1 / 3)) for M in Ms]
    assert abs(np.polyfit(np.log(Ms), np.log(k), 1)[0] - 1 / 3) < 0.05
    bounded = [kappa_M(FrequencyLattice(1, M, 1.0)) for M in Ms]
    assert max(bounded) < 0.5 * (1 + math.pi / math.tanh(math.pi))


def test_f_M_normalised_and_real():
    lat = FrequencyLattice(1, 64, 1 / 3)
    f = build_f_M(BumpSpec(64, 1), lat, fast_grid(3 * 64))
    assert f.hermitian_defect() < 1e-15
    assert float(integrate_product([f, f])) == pytest.approx(1.0, abs=0.02)


def test_f_M_cube_vanishes_on_narrow_annulus():
    # |n| in (M/2, M] admits no n1 + n2 + n3 = 0 in one dimension
    lat = FrequencyLattice(1, 32, 1 / 3)
    f = build_f_M(BumpSpec(32, 1, inner=0.5), lat, fast_grid(3 * 32))
    assert abs(float(integrate_product([f, f, f]))) < 1e-14
    wide = build_f_M(BumpSpec(32, 1), lat, fast_grid(3 * 32))
    assert float(integrate_product([wide, wide, wide])) > 0


def test_f_M_cube_scaling():
    # int f_M^3 ~ M^(d/2) for a bump with nonzero self-convolution
    vals = []
    for M in (16, 32, 64, 128):
        f = build_f_M(BumpSpec(M, 1), FrequencyLattice(1, M, 1 / 3), fast_grid(3 * M))
        vals.append(float(integrate_product([f, f, f])) / math.sqrt(M))
    assert max(vals) / min(vals) < 1.1


def test_f_M_errors():
    lat = FrequencyLattice(1, 8, 1 / 3)
    with pytest.raises(ValueError):
        build_f_M(BumpSpec(16, 1), lat)
    with pytest.raises(ValueError):
        build_f_M(BumpSpec(1, 1), lat)
    with pytest.raises(ValueError):
        build_f_M(BumpSpec(4, 2), lat)
