"""Kernel regression denoiser on a single patch.

The noisy values ``z`` are smoothed twice by Markov averaging operators,
``rhs = P @ G @ z``, and the coefficients ``a`` on a strided subgrid solve the
ridge problem ``min |P K a - rhs|^2 + theta |a|^2``.  The denoised patch is
``K @ a``.  Every operator depends only on the lattice geometry and the
configuration, so the whole map ``z -> K a`` is a fixed linear filter.
"""

from __future__ import annotations

import dataclasses
import enum
import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .bandwidth import DEFAULT_EPS_ZERO, BandwidthSelection, grid_spacing
from .imaging import GrayscaleImage, lattice_points
from .kernels import (
    DiffusionKernel,
    GaussianKernel,
    SparseKernelMatrix,
    gaussian_markov_matrix,
    kernel_cross_matrix,
    lattice_degrees,
)
from .solver import RidgeSolver, SolverMode, SolverPolicy, spectral_norm


class ConfigError(ValueError):
    pass


class RKHSKernel(str, enum.Enum):
    GAUSSIAN = "gaussian"
    DIFFUSION = "diffusion"


@dataclass(frozen=True)
class DenoiseConfig:
    """Every tunable of the denoiser.

    ``eta2``, ``eta3`` and ``eta_g`` select the bandwidths of the RKHS kernel,
    the Markov operator ``P`` and the pre-smoother ``G`` (``None`` means same as
    ``eta3``).  ``stride`` sets the subgrid: every ``stride``-th pixel per axis.
    ``theta`` is ``theta_factor`` times the spectral norm of the kernel matrix.
    """

    eta2: int = 64
    eta3: int = 4
    eta_g: int | None = None
    stride: int = 4
    theta_factor: float = 0.01
    eps_zero: float = DEFAULT_EPS_ZERO
    rkhs_kernel: RKHSKernel = RKHSKernel.DIFFUSION
    solver: SolverPolicy = field(default_factory=SolverPolicy)
    tile: int = 64
    overlap: int = 16
    delta1: float = 1.0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "rkhs_kernel", RKHSKernel(self.rkhs_kernel))
        if isinstance(self.solver, dict):
            object.__setattr__(self, "solver", SolverPolicy(**self.solver))
        for name in ("eta2", "eta3"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 2:
                raise ConfigError(f"{name} must be an integer >= 2")
        if self.eta_g is not None and (int(self.eta_g) != self.eta_g or self.eta_g < 2):
            raise ConfigError("eta_g must be an integer >= 2")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if not (self.theta_factor > 0):
            raise ConfigError("theta_factor must be positive")
        if not (0 < self.eps_zero < 1):
            raise ConfigError("eps_zero must lie in (0, 1)")
        if not (self.tile > self.overlap >= 1):
            raise ConfigError("need tile > overlap >= 1")
        if not (self.delta1 > 0):
            raise ConfigError("delta1 must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def eta_smoother(self) -> int:
        return self.eta3 if self.eta_g is None else self.eta_g

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["rkhs_kernel"] = self.rkhs_kernel.value
        d["solver"]["mode"] = self.solver.mode.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DenoiseConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def subgrid_indices(m: int, n: int, stride: int) -> np.ndarray:
    """Flat row-major indices of every ``stride``-th pixel, anchored at ``stride // 2``."""
    off = stride // 2
    rows = np.arange(min(off, m - 1), m, stride)
    cols = np.arange(min(off, n - 1), n, stride)
    return (rows[:, None] * n + cols[None, :]).ravel()


@dataclass(frozen=True)
class FilterOperators:
    shape: tuple[int, int]
    G: SparseKernelMatrix
    P: SparseKernelMatrix
    K: SparseKernelMatrix
    subgrid: np.ndarray
    W: sp.csr_matrix  # P @ K
    theta: float
    kernel_norm: float
    bandwidths: dict
    solver: RidgeSolver = field(repr=False)

    @property
    def N(self) -> int:
        return self.K.nrows

    @property
    def M(self) -> int:
        return self.K.ncols

    def rhs(self, z) -> np.ndarray:
        return self.P.matrix @ (self.G.matrix @ z)

    def coefficients(self, z) -> np.ndarray:
        return self.solver.solve(self.rhs(z))

    def apply(self, z) -> np.ndarray:
        return self.K.matrix @ self.coefficients(z)

    def normal_matrix(self) -> np.ndarray:
        """``K^T P^T P K`` (dense ``M x M``)."""
        W = self.W
        return np.asarray((W.T @ W).toarray())

    def diagnostics(self) -> dict:
        return {
            "N": self.N,
            "M": self.M,
            "theta": self.theta,
            "kernel_norm": self.kernel_norm,
            **self.bandwidths,
            "condition_estimate": self.solver.condition_estimate(),
        }


@dataclass(frozen=True)
class DenoiseResult:
    coefficients: np.ndarray
    denoised: GrayscaleImage
    diagnostics: dict


@functools.lru_cache(maxsize=16)
def _operators_for_grid(m: int, n: int, length: float, width: float, cfg: DenoiseConfig) -> FilterOperators:
    h = grid_spacing(m, n, length, width)
    bw3 = BandwidthSelection.from_eta(cfg.eta3, h, cfg.eps_zero)
    bwg = BandwidthSelection.from_eta(cfg.eta_smoother, h, cfg.eps_zero)
    bw2 = BandwidthSelection.from_eta(cfg.eta2, h, cfg.eps_zero)

    pts = lattice_points(m, n, length, width)
    sub = subgrid_indices(m, n, cfg.stride)
    if sub.size == 0:
        raise ConfigError("empty subgrid")
    try:
        P = gaussian_markov_matrix(pts, bw3.delta, cfg.eps_zero)
        G = P if bwg.delta == bw3.delta else gaussian_markov_matrix(pts, bwg.delta, cfg.eps_zero)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    if cfg.rkhs_kernel is RKHSKernel.DIFFUSION:
        deg = lattice_degrees(m, n, length, width, bw2.delta, cfg.eps_zero)
        kernel = DiffusionKernel(bw2.delta, deg, deg.subset(sub))
    else:
        kernel = GaussianKernel(bw2.delta)
    K = kernel_cross_matrix(pts, pts[sub], kernel, cfg.eps_zero)

    kernel_norm = spectral_norm(K.matrix)
    theta = cfg.theta_factor * kernel_norm
    W = sp.csr_matrix(P.matrix @ K.matrix)
    policy = cfg.solver
    if policy.mode is SolverMode.RANDOMIZED_SVD and policy.rank is not None and policy.rank > min(W.shape):
        policy = dataclasses.replace(policy, rank=min(W.shape))
    solver = RidgeSolver(W, theta, policy)
    bandwidths = {
        "delta2": bw2.delta,
        "delta3": bw3.delta,
        "delta_g": bwg.delta,
        "radius2": bw2.radius,
        "radius3": bw3.radius,
        "pixel_spacing": h,
    }
    return FilterOperators((m, n), G, P, K, sub, W, theta, kernel_norm, bandwidths, solver)


def build_operators(patch: GrayscaleImage, cfg: DenoiseConfig) -> FilterOperators:
    m, n = patch.shape
    # patch-geometry fields do not affect the operators; keep them out of the cache key
    key = dataclasses.replace(cfg, tile=64, overlap=16, delta1=1.0, workers=1)
    return _operators_for_grid(m, n, patch.length, patch.width, key)


def denoise_patch(patch: GrayscaleImage, cfg: DenoiseConfig, operators: FilterOperators | None = None) -> DenoiseResult:
    ops = operators or build_operators(patch, cfg)
    z = patch.values.ravel()
    a = ops.coefficients(z)
    out = (ops.K.matrix @ a).reshape(patch.shape)
    return DenoiseResult(a, patch.with_values(out), ops.diagnostics())


def noise_residual(P, y) -> np.ndarray:
    """Markov-averaged noise ``(1/N) sum_n p(x_j, x_n) y_n``.

    ``P`` is the row-stochastic matrix, i.e. ``P[j, n] = p(x_j, x_n) / N``.
    """
    mat = P.matrix if isinstance(P, SparseKernelMatrix) else P
    y = np.asarray(y, dtype=float)
    if mat.shape[1] != y.shape[0]:
        raise ValueError("dimension mismatch")
    return np.asarray(mat @ y).ravel()
