"""Acceptance criteria 1-9.

Each test times itself, records a PASS/FAIL line (printed in the terminal
summary by ``conftest.py``) and then asserts both the numerical criterion and
its runtime bound.  Run alone with ``pytest tests/test_acceptance.py``.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from kdenoise.bandwidth import BandwidthSelection, min_radius, min_radius_squared
from kdenoise.imaging import GrayscaleImage, NoiseModel, add_noise, l2_error, sup_error, synth_cosine, synth_zero
from kdenoise.kernels import diffusion_kernel_matrix, gaussian, gaussian_markov_matrix, gaussian_matrix, symmetrize
from kdenoise.patches import blend, denoise_image, make_cover
from kdenoise.pipeline import DenoiseConfig, denoise_patch, noise_residual
from kdenoise.solver import RidgeProblem, SolverPolicy, ridge_solve

RESULTS: dict[int, str] = {}


@contextmanager
def criterion(number, title, limit):
    """Time the body; it must set ``box["ok"]`` and may set ``box["detail"]``."""
    box = {"ok": False, "detail": ""}
    t0 = time.perf_counter()
    try:
        yield box
    finally:
        secs = time.perf_counter() - t0
        ok = box["ok"] and secs < limit
        RESULTS[number] = f"criterion {number} {title}: {'PASS' if ok else 'FAIL'} ({secs:.2f}s < {limit}s) {box['detail']}".rstrip()
    assert box["ok"], box["detail"]
    assert secs < limit, f"runtime {secs:.1f}s exceeds {limit}s"


def test_1_kernel_correctness():
    with criterion(1, "kernel correctness", 10) as box:
        r = np.random.default_rng(1)
        worst_row = 0.0
        for _ in range(1000):
            n = int(r.integers(1, 60))
            pts = r.random((n, 2)) * r.uniform(0.1, 3)
            eps = [0.0, 1e-16, 1e-14, 1e-8, 1e-3][int(r.integers(5))]
            P = gaussian_markov_matrix(pts, float(r.uniform(1e-3, 1.0)), eps)
            worst_row = max(worst_row, np.max(np.abs(np.asarray(P.matrix.sum(axis=1)).ravel() - 1)))
        worst_sym = 0.0
        for _ in range(50):
            pts = r.random((int(r.integers(2, 80)), 2))
            delta = float(r.uniform(1e-3, 0.3))
            raw = gaussian_matrix(pts, pts, delta, 1e-14)
            K, deg = diffusion_kernel_matrix(pts, delta, 1e-14)
            S = symmetrize(raw, deg).toarray()
            worst_sym = max(worst_sym, np.max(np.abs(deg.rho[:, None] * K.toarray() / deg.rho[None, :] - S)))
        exact = True
        for _ in range(50):
            a, b = r.random((int(r.integers(1, 40)), 2)), r.random((int(r.integers(1, 40)), 2))
            delta = float(r.uniform(1e-3, 1.0))
            d = a[:, None, :] - b[None, :, :]
            exact &= np.array_equal(gaussian_matrix(a, b, delta, 0.0).toarray(), np.exp(-np.sum(d * d, axis=-1) / delta))
        box["ok"] = worst_row <= 1e-12 and worst_sym <= 1e-12 and exact
        box["detail"] = f"row-sum err {worst_row:.1e}, symm err {worst_sym:.1e}, dense-exact {exact}"


def test_2_bandwidth_oracle():
    with criterion(2, "bandwidth oracle", 1) as box:
        enum_ok = all(
            min_radius_squared(eta) == sorted(a * a + b * b for a in range(-eta, eta + 1) for b in range(-eta, eta + 1))[eta * eta - 1]
            for eta in range(2, 13)
        )
        sqrt5 = min_radius(4) == math.sqrt(5)
        rel = 0.0
        for eta in range(2, 13):
            for h in (1.0, 0.1, 1 / 64, 1 / 250):
                sel = BandwidthSelection.from_eta(eta, h, 1e-14)
                rel = max(rel, abs(gaussian(sel.radius, 0.0, sel.delta) / 1e-14 - 1))
        box["ok"] = enum_ok and sqrt5 and rel <= 1e-15
        box["detail"] = f"enumeration {enum_ok}, R(4)=sqrt5 {sqrt5}, max rel err at R*h {rel:.2e} (need 1e-15)"


def test_3_solver_oracle():
    with criterion(3, "solver oracle", 30) as box:
        r = np.random.default_rng(3)
        worst, shrink = 0.0, True
        for k in range(100):
            m = int(r.integers(2, 501))
            n = int(r.integers(1, min(m, 200) + 1))
            A, y = r.standard_normal((m, n)), r.standard_normal(m)
            theta = float(10 ** r.uniform(-3, 1))
            oracle = np.linalg.solve(A.T @ A + theta * np.eye(n), A.T @ y)
            for policy in (SolverPolicy(), SolverPolicy(mode="randomized_svd", rank=n, seed=k)):
                x = ridge_solve(RidgeProblem(A, y, theta), policy)
                worst = max(worst, np.linalg.norm(x - oracle) / np.linalg.norm(oracle))
            norms = [np.linalg.norm(ridge_solve(RidgeProblem(A, y, t))) for t in (theta / 10, theta, theta * 10)]
            shrink &= norms[0] >= norms[1] >= norms[2]
        box["ok"] = worst <= 1e-8 and shrink
        box["detail"] = f"max rel err {worst:.1e}, shrinkage monotone {shrink}"


def test_4_filter_linearity():
    with criterion(4, "filter linearity", 30) as box:
        r = np.random.default_rng(4)
        cfg = DenoiseConfig()
        worst = 0.0
        f = lambda z: denoise_patch(GrayscaleImage(z), cfg).denoised.values  # noqa: E731
        for _ in range(50):
            z1, z2 = r.standard_normal((32, 32)), r.standard_normal((32, 32))
            a, b = r.uniform(-2, 2, size=2)
            worst = max(worst, np.max(np.abs(f(a * z1 + b * z2) - (a * f(z1) + b * f(z2)))))
        box["ok"] = worst <= 1e-8
        box["detail"] = f"max superposition err {worst:.1e}"


def test_5_experiment_1_zero_signal():
    with criterion(5, "experiment 1 (zero signal)", 120) as box:
        clean = synth_zero(100, 100)
        ok, worst_ratio = True, 0.0
        for seed in range(1, 6):
            noisy = add_noise(clean, NoiseModel("uniform", 0.5, seed))
            base = l2_error(noisy, clean)
            errs = [l2_error(denoise_image(noisy, DenoiseConfig(eta3=e))[0], clean) for e in (2, 3, 4)]
            worst_ratio = max(worst_ratio, errs[2] / base)
            ok &= errs[2] < 0.5 * base and errs[0] > errs[1] > errs[2]
        box["ok"] = ok
        box["detail"] = f"worst denoised/noisy L2 ratio at eta3=4: {worst_ratio:.3f}"


def test_6_experiment_2_cosine():
    with criterion(6, "experiment 2 (cosine)", 600) as box:
        ok, parts = True, []
        for alpha in (5.0, 20.0):
            clean = synth_cosine(250, 250, alpha=alpha)
            noisy = add_noise(clean, NoiseModel("gaussian", 0.1, 0))
            base = l2_error(noisy, clean)
            e2 = l2_error(denoise_image(noisy, DenoiseConfig(eta3=2))[0], clean)
            e4 = l2_error(denoise_image(noisy, DenoiseConfig(eta3=4))[0], clean)
            ok &= e4 < base
            if alpha == 5.0:
                ok &= e4 <= e2
            parts.append(f"alpha={alpha:g}: noisy {base:.4f} eta3=2 {e2:.5f} eta3=4 {e4:.5f}")
        box["ok"] = ok
        box["detail"] = "; ".join(parts)


def convergence_config(side):
    stride = side // 16  # M = 256 subgrid points at every size
    return DenoiseConfig(eta2=16 * stride, stride=stride, tile=max(side, 64), overlap=16)


def test_7_convergence_trend():
    with criterion(7, "convergence trend", 600) as box:
        ok, rows = True, []
        for seed in (1, 2, 3):
            errs = []
            for side in (32, 64, 128):
                clean = synth_cosine(side, side, alpha=5.0)
                noisy = add_noise(clean, NoiseModel("gaussian", 0.1, seed))
                errs.append(sup_error(denoise_image(noisy, convergence_config(side))[0], clean))
            ok &= all(b <= 1.1 * a for a, b in zip(errs, errs[1:]))
            rows.append("/".join(f"{e:.3f}" for e in errs))
        box["ok"] = ok
        box["detail"] = "sup errors per seed (32,64,128): " + ", ".join(rows)


def test_8_patch_blending():
    with criterion(8, "patch blending", 60) as box:
        r = np.random.default_rng(8)
        img = GrayscaleImage(r.random((48, 40)))
        cfg = DenoiseConfig(eta2=16, stride=4)
        single = np.array_equal(denoise_image(img, cfg)[0].values, denoise_patch(img, cfg).denoised.values)
        constant = convex = True
        for _ in range(20):
            m, n = (int(v) for v in r.integers(10, 150, size=2))
            tile = int(r.integers(4, 64))
            cover = make_cover(m, n, tile=tile, overlap=int(r.integers(1, tile)), delta1=float(r.uniform(0.1, 3)))
            shapes = [(p.rows.stop - p.rows.start, p.cols.stop - p.cols.start) for p in cover.patches]
            c = float(r.standard_normal())
            constant &= bool(np.all(blend([np.full(s, c) for s in shapes], cover) == c))
            est = [r.standard_normal(s) for s in shapes]
            lo, hi = np.full((m, n), np.inf), np.full((m, n), -np.inf)
            for p, e in zip(cover.patches, est):
                lo[p.rows, p.cols] = np.minimum(lo[p.rows, p.cols], e)
                hi[p.rows, p.cols] = np.maximum(hi[p.rows, p.cols], e)
            out = blend(est, cover)
            convex &= bool(np.all((lo <= out) & (out <= hi)))
        box["ok"] = single and constant and convex
        box["detail"] = f"single-patch exact {single}, constant exact {constant}, convex bound {convex}"


def test_9_noise_residual_oracle():
    with criterion(9, "noise-residual oracle", 5) as box:
        r = np.random.default_rng(9)
        worst = 0.0
        for _ in range(100):
            N = int(r.integers(1, 40))
            raw = r.random((N, N)) * (r.random((N, N)) < 0.7) + np.eye(N)
            P = raw / raw.sum(axis=1, keepdims=True)
            y = r.standard_normal(N)
            got = noise_residual(P, y)
            for j in range(N):
                # p(x_j, x_n) = N * P[j, n]
                direct = sum(N * P[j, n] * y[n] for n in range(N)) / N
                worst = max(worst, abs(got[j] - direct))
        box["ok"] = worst <= 1e-12
        box["detail"] = f"max abs err {worst:.1e}"


@pytest.fixture(scope="module", autouse=True)
def _clear():
    RESULTS.clear()
    yield
