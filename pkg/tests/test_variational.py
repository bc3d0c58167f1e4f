import math

import numpy as np
import pytest

from phi3d.gff import BumpSpec, GaussianPath, build_f_M, build_Z_M, fast_grid, kappa_M, sample_Y
from phi3d.gibbs import estimate_Z, make_params
from phi3d.field import sobolev_norm
from phi3d.lattice import beta_N
from phi3d.variational import (DriftSpec, assemble_theta, bd_direct_samples, bd_samples, classify,
                               crossover_window, eval_bd_objective, fZ_from_path, scan_nonnormalisability,
                               strictly_decreasing)


def skeleton_path(params, K, n, seed):
    return sample_Y(params.lattice, np.arange(1, K + 1) / K, seed, n)


def mean_se(x):
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(len(x)))


@pytest.mark.parametrize("kw", [dict(kind="other"), dict(kind="explicit_nn"), dict(kind="explicit_nn", M=1),
                                dict(time_steps=7), dict(rule="midpoint")])
def test_drift_spec_validation(kw):
    with pytest.raises(ValueError):
        DriftSpec(**kw)


def test_zero_drift_objective_is_V():
    p = make_params(1, 1 / 3, 8, 1.0)
    path = sample_Y(p.lattice, [1.0], 0, 20)
    terms = assemble_theta(DriftSpec(), path, p)
    assert not np.any(terms.theta.coeffs)
    free = make_params(1, 1 / 3, 8, 0.0, A=0.0)
    assert np.all(bd_samples(DriftSpec(), free, path) == 0.0)
    est = eval_bd_objective(DriftSpec(), free, 200, 1)
    assert est.mean == 0.0


def test_explicit_drift_upsilon_identity():
    p = make_params(1, 1 / 3, 16, -2.0)
    K, M = 16, 8
    path = skeleton_path(p, K, 10, 3)
    G = fast_grid(3 * p.N)
    terms = assemble_theta(DriftSpec("explicit_nn", M, K), path, p, G)
    z = build_Z_M(path, M, G).coeffs
    f = build_f_M(BumpSpec(M, 1), p.lattice, G).coeffs
    resid = terms.upsilon.coeffs + z + math.sqrt(kappa_M(p.lattice.with_N(M))) * f
    assert np.max(np.abs(resid)) < 1e-14
    assert np.allclose(terms.theta.coeffs, terms.upsilon.coeffs + p.sigma * terms.fZ.coeffs)


def test_sigma_zero_drift_cancels_low_modes():
    # sigma = 0: Y(1) + Theta keeps only the increment after t = 1/2 on |n| <= M
    p = make_params(1, 1 / 3, 16, 0.0)
    K, M = 16, 8
    path = skeleton_path(p, K, 4, 5)
    G = fast_grid(3 * p.N)
    terms = assemble_theta(DriftSpec("explicit_nn", M, K), path, p, G)
    shifted = path.field(-1, G, M).coeffs + terms.theta.coeffs
    incr = path.field(-1, G, M).coeffs - path.field(K // 2 - 1, G, M).coeffs
    assert np.allclose(shifted, incr, atol=1e-14)


def test_kinetic_term_closed_form():
    # sigma = 0, A = 0: objective = ||Z_M||^2_{H^alpha}, mean (2M + 1)^d / 2
    p = make_params(1, 1 / 3, 16, 0.0, A=0.0)
    M = 8
    est = eval_bd_objective(DriftSpec("explicit_nn", M, 16), p, 4000, 2)
    assert abs(est.mean - (2 * M + 1) / 2) < 3 * est.stderr


def test_fZ_quadrature_converged():
    p = make_params(1, 1 / 3, 16, 1.0)
    K = 128
    fine = skeleton_path(p, K, 200, 7)
    coarse = GaussianPath(fine.lattice, fine.times[1::2], fine.values[1::2], fine.modes, fine.seed)
    a = fZ_from_path(fine, K)
    b = fZ_from_path(coarse, K // 2)
    ha, hb = sobolev_norm(a, p.alpha), sobolev_norm(b, p.alpha)
    assert abs(float(np.mean(hb)) / float(np.mean(ha)) - 1) < 0.01
    assert float(np.mean(sobolev_norm(a - b, p.alpha))) < 0.1 * float(np.mean(ha))


def test_fZ_rejects_wrong_skeleton():
    p = make_params(1, 1 / 3, 8, 1.0)
    with pytest.raises(ValueError):
        fZ_from_path(skeleton_path(p, 16, 2, 0), 32)


def test_direct_form_matches_reduced_form():
    # left-point drift: the discrete sigma^2 kinetic term falls short of
    # beta_N by sigma^2 S3 (1/(2K) - 1/(6K^2)), S3 = 3 beta_N(sigma = 1)
    N, M, K, s = 8, 4, 16, 1.0
    p = make_params(1, 1 / 3, N, s, A=0.1)
    path = skeleton_path(p, K, 6000, 11)
    drift = DriftSpec("explicit_nn", M, K, rule="left")
    red = bd_samples(drift, p, path)
    dire = bd_direct_samples(drift, p, path)
    S3 = 3 * beta_N(p.lattice, 1.0)
    shift = s**2 * S3 * (1 / (2 * K) - 1 / (6 * K**2))
    m, se = mean_se(dire - red)
    assert abs(m - shift) < 3 * se
    with pytest.raises(ValueError):
        bd_direct_samples(DriftSpec(), p, path)


def test_sign_equivariance():
    p = make_params(1, 1 / 3, 16, 2.0)
    q = make_params(1, 1 / 3, 16, -2.0)
    K = 16
    path = skeleton_path(p, K, 8, 4)
    flipped = GaussianPath(path.lattice, path.times, -path.values, path.modes, path.seed)
    drift = DriftSpec("explicit_nn", 8, K)
    assert np.allclose(bd_samples(drift, p, path), bd_samples(drift, q, flipped), rtol=1e-10)


def test_objective_upper_bounds_free_energy():
    p = make_params(1, 1 / 3, 16, 1.0)
    z = estimate_Z(p, 8000, 3)
    for drift in (DriftSpec(), DriftSpec("explicit_nn", 4, 16)):
        est = eval_bd_objective(drift, p, 2000, 5)
        assert est.mean + 3 * est.stderr >= -z.log_mean - 3 * z.log_stderr


def test_objective_thread_independent():
    p = make_params(1, 1 / 3, 16, 1.0)
    drift = DriftSpec("explicit_nn", 4, 16)
    a = eval_bd_objective(drift, p, 2500, 5, threads=1)
    b = eval_bd_objective(drift, p, 2500, 5, threads=2)
    assert a.mean == b.mean and a.stderr == b.stderr


def test_objective_errors():
    p = make_params(1, 1 / 3, 8, 1.0)
    with pytest.raises(ValueError):
        eval_bd_objective(DriftSpec(), p, 200, 0, form="other")
    with pytest.raises(ValueError):
        assemble_theta(DriftSpec("explicit_nn", 16, 16), skeleton_path(p, 16, 2, 0), p)
    with pytest.raises(ValueError):
        bd_samples(DriftSpec("explicit_nn", 4, 16), make_params(1, 1.0, 8, 1.0), skeleton_path(p, 16, 2, 0))


def test_classification_rules():
    assert classify([], []) == "stable"
    assert classify([5.0, -4.0], [1.0, 1.0]) == "divergent"
    assert classify([-5.0, -2.0], [1.0, 1.0]) == "stable"
    assert strictly_decreasing([-5.0, -4.0], [1.0, 1.0])
    assert not strictly_decreasing([5.0, -4.0], [1.0, 1.0])
    assert not strictly_decreasing([], [])
    lo, hi = crossover_window({0.1: "stable", 1.0: "stable", 3.0: "divergent", 10.0: "divergent"})
    assert (lo, hi) == (1.0, 3.0)
    lo, hi = crossover_window({0.1: "stable"})
    assert lo == 0.1 and math.isnan(hi)


def test_scan_errors():
    with pytest.raises(ValueError):
        scan_nonnormalisability(make_params(1, 1.0, 8, 1.0), [4], [1.0], 100, 0)
    with pytest.raises(ValueError):
        scan_nonnormalisability(make_params(1, 1 / 3, 8, 1.0), [4, 16], [1.0], 100, 0)


def test_scan_cap_sensitivity_and_common_numbers():
    p = make_params(1, 1 / 3, 16, 1.0, A=1e-6)
    rep = scan_nonnormalisability(p, [4, 8], [0.0, 1.0], 200, 3, time_steps=16)
    assert rep.classification[0.0] == "stable"
    per_delta = {}
    for delta, M, s, obj, se, cl in rep.sensitivity:
        per_delta.setdefault((M, s), set()).add(obj)
    # infinite cap: taming excess vanishes for every delta
    assert all(len(v) == 1 for v in per_delta.values())
    for c in rep.cells:
        if c.M == 8:
            assert c.diff_stderr > 0


def test_scan_separates_small_and_large_sigma():
    # the cubic gain and the kinetic cost both grow linearly in M; for large
    # sigma the gain wins once M is large enough to outrun the sigma^2 terms
    p = make_params(1, 1 / 3, 512, 1.0, A=1e-6)
    rep = scan_nonnormalisability(p, [128, 256, 512], [0.05, 10.0], 1000, 1, time_steps=32)
    assert rep.classification[0.05] == "stable"
    assert rep.classification[10.0] == "divergent"
    diffs = [c.diff for c in rep.cells if c.sigma == 10.0 and c.M > 128]
    assert diffs[1] < diffs[0]
    assert rep.window == (0.05, 10.0)
