import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kdenoise.bandwidth import lattice_count, min_radius_squared
from kdenoise.imaging import GrayscaleImage, NoiseModel, add_noise, l2_error, synth_zero
from kdenoise.kernels import gaussian_markov_matrix
from kdenoise.pipeline import (
    ConfigError,
    DenoiseConfig,
    build_operators,
    denoise_patch,
    noise_residual,
    subgrid_indices,
)
from kdenoise.solver import SolverPolicy

SMALL = DenoiseConfig(eta2=8, stride=2)


def test_stride_one_full_lattice():
    ops = build_operators(synth_zero(6, 5), DenoiseConfig(eta2=4, stride=1))
    assert ops.M == ops.N == 30
    assert np.array_equal(ops.subgrid, np.arange(30))


def test_subgrid_8x8_stride2():
    idx = subgrid_indices(8, 8, 2)
    assert idx.size == 16
    r, c = np.divmod(idx, 8)
    assert set(r) == set(c) == {1, 3, 5, 7}


def test_subgrid_anchor():
    r, c = np.divmod(subgrid_indices(10, 7, 3), 7)
    assert sorted(set(r)) == [1, 4, 7] and sorted(set(c)) == [1, 4]


def test_markov_interior_support():
    ops = build_operators(synth_zero(16, 16), DenoiseConfig(eta2=4, eta3=4, stride=1))
    counts = np.diff(ops.P.matrix.indptr).reshape(16, 16)
    r = int(np.ceil(np.sqrt(min_radius_squared(4))))
    interior = counts[r:-r, r:-r]
    assert np.all(interior >= 16)
    assert np.all(interior == lattice_count(min_radius_squared(4)))


def test_operators_row_stochastic():
    ops = build_operators(synth_zero(12, 10), DenoiseConfig(eta2=6, eta3=3, eta_g=5, stride=2))
    for M in (ops.P, ops.G):
        assert np.allclose(np.asarray(M.matrix.sum(axis=1)).ravel(), 1, atol=1e-12)
    assert ops.M <= ops.N
    assert ops.diagnostics()["delta_g"] > ops.diagnostics()["delta3"]


@pytest.mark.parametrize(
    "kw", [{"eta2": 1}, {"eta3": 0}, {"eta_g": 1}, {"stride": 0}, {"theta_factor": 0}, {"eps_zero": 0}, {"tile": 8, "overlap": 8}]
)
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        DenoiseConfig(**kw)


def test_config_round_trip():
    cfg = DenoiseConfig(eta2=10, rkhs_kernel="gaussian", solver=SolverPolicy(mode="randomized_svd", rank=5))
    assert DenoiseConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        DenoiseConfig.from_dict({"bogus": 1})


def test_zero_in_zero_out():
    res = denoise_patch(synth_zero(20, 20), SMALL)
    assert not np.any(res.coefficients)
    assert not np.any(res.denoised.values)


def test_denoised_equals_k_times_a(rng):
    patch = GrayscaleImage(rng.random((20, 18)))
    res = denoise_patch(patch, SMALL)
    ops = build_operators(patch, SMALL)
    assert np.allclose(res.denoised.values.ravel(), ops.K.toarray() @ res.coefficients, atol=1e-13)
    for key in ("theta", "delta2", "delta3", "condition_estimate"):
        assert key in res.diagnostics


def test_explicit_normal_equations(rng):
    patch = GrayscaleImage(rng.random((16, 16)))
    ops = build_operators(patch, SMALL)
    z = patch.values.ravel()
    P, G, K = ops.P.toarray(), ops.G.toarray(), ops.K.toarray()
    W = P @ K
    a = np.linalg.solve(W.T @ W + ops.theta * np.eye(ops.M), W.T @ (P @ G @ z))
    res = denoise_patch(patch, SMALL)
    assert np.allclose(res.coefficients, a, rtol=1e-8, atol=1e-10 * np.abs(a).max())
    assert ops.theta == pytest.approx(0.01 * np.linalg.norm(K, 2), rel=1e-6)


@settings(max_examples=10)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(seed, alpha, beta):
    r = np.random.default_rng(seed)
    z1, z2 = r.standard_normal((32, 32)), r.standard_normal((32, 32))
    cfg = DenoiseConfig(eta2=16, stride=4)
    f = lambda z: denoise_patch(GrayscaleImage(z), cfg).denoised.values  # noqa: E731
    assert np.max(np.abs(f(alpha * z1 + beta * z2) - (alpha * f(z1) + beta * f(z2)))) < 1e-8


def test_theta_trend_on_representable_truth(rng):
    base = DenoiseConfig(eta2=32, stride=4)
    ops = build_operators(synth_zero(32, 32), base)
    z = ops.K.matrix @ rng.standard_normal(ops.M)
    errs = []
    for tf in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6):
        out = denoise_patch(GrayscaleImage(z.reshape(32, 32)), dataclasses.replace(base, theta_factor=tf))
        errs.append(np.max(np.abs(out.denoised.values.ravel() - z)))
    assert all(a > b for a, b in zip(errs, errs[1:])), errs


def test_noise_residual_oracle(rng):
    N = 25
    raw = rng.random((N, N))
    P = raw / raw.sum(axis=1, keepdims=True)
    y = rng.standard_normal(N)
    # p(x_j, x_n) = N * P[j, n]
    expect = [sum(N * P[j, n] * y[n] for n in range(N)) / N for j in range(N)]
    assert np.allclose(noise_residual(P, y), expect, rtol=0, atol=1e-12)


def test_noise_residual_trivial(rng):
    P = gaussian_markov_matrix(rng.random((10, 2)), 0.1, 1e-14)
    assert not np.any(noise_residual(P, np.zeros(10)))
    y = rng.standard_normal(7)
    res = noise_residual(np.full((7, 7), 1 / 7), y)
    assert np.allclose(res, y.mean(), atol=1e-15)
    with pytest.raises(ValueError):
        noise_residual(P, np.ones(3))


@pytest.mark.parametrize("eta2", [3, 4, 6])
def test_shift_equivariance_interior(eta2):
    cfg = DenoiseConfig(eta2=eta2, eta3=3, stride=1)
    z = np.zeros((48, 48))
    z[22:25, 20:23] = 1.0
    shifted = np.roll(z, 1, axis=1)
    a = denoise_patch(GrayscaleImage(z), cfg).denoised.values
    b = denoise_patch(GrayscaleImage(shifted), cfg).denoised.values
    assert np.max(np.abs(np.roll(a, 1, axis=1)[12:36, 12:36] - b[12:36, 12:36])) < 1e-6


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_variance_reduction(seed):
    noisy = add_noise(synth_zero(100, 100), NoiseModel("gaussian", 0.1, seed))
    res = denoise_patch(noisy, DenoiseConfig(eta3=4))
    assert l2_error(res.denoised, synth_zero(100, 100)) < l2_error(noisy, synth_zero(100, 100))


def test_randomized_path_matches_dense(rng):
    patch = GrayscaleImage(rng.random((24, 24)))
    dense = denoise_patch(patch, SMALL).denoised.values
    fast = denoise_patch(patch, dataclasses.replace(SMALL, solver=SolverPolicy(mode="randomized_svd"))).denoised.values
    assert np.max(np.abs(dense - fast)) <= 1e-8 * np.max(np.abs(dense))


def test_gaussian_rkhs_kernel(rng):
    patch = GrayscaleImage(rng.random((16, 16)))
    res = denoise_patch(patch, dataclasses.replace(SMALL, rkhs_kernel="gaussian"))
    assert res.denoised.shape == (16, 16)
    assert np.all(np.isfinite(res.denoised.values))
