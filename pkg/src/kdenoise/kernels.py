"""Gaussian, Markov-normalised and diffusion kernels on point sets and pixel lattices.

All matrices are stored as ``scipy.sparse.csr_matrix``.  Raw Gaussian values
below ``eps_zero`` are dropped *before* any normalisation, so the sparsity
pattern of every derived matrix is that of the truncated Gaussian.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.ndimage
import scipy.sparse as sp
from scipy.spatial import cKDTree

# Relative slack on the truncation test.  Lattice neighbours sitting exactly on
# the selection radius evaluate to eps_zero only up to rounding; they must stay.
TRUNCATION_RTOL = 1e-9


class DegenerateRowError(ValueError):
    """A kernel row has no stored entry (bandwidth too small for the grid)."""


class RowKind(str, enum.Enum):
    RAW = "raw"
    MARKOV = "markov"
    DIFFUSION = "diffusion"
    DIFFUSION_SYMMETRIC = "diffusion_symmetric"


@dataclass(frozen=True)
class SparseKernelMatrix:
    matrix: sp.csr_matrix
    eps_zero: float
    row_kind: RowKind = RowKind.RAW

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def nrows(self) -> int:
        return self.matrix.shape[0]

    @property
    def ncols(self) -> int:
        return self.matrix.shape[1]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def entries(self):
        """``(rows, cols, values)`` of the stored entries."""
        coo = self.matrix.tocoo()
        return coo.row, coo.col, coo.data

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def __matmul__(self, other):
        return self.matrix @ other


@dataclass(frozen=True)
class DegreeVectors:
    deg_r: np.ndarray
    deg_l: np.ndarray

    def __post_init__(self):
        if np.any(~(self.deg_r > 0)) or np.any(~(self.deg_l > 0)):
            raise DegenerateRowError("diffusion degrees must be strictly positive")

    @property
    def rho(self) -> np.ndarray:
        return np.sqrt(self.deg_l / self.deg_r)

    def subset(self, idx) -> "DegreeVectors":
        return DegreeVectors(self.deg_r[idx], self.deg_l[idx])


def gaussian(x, x2, delta: float):
    """``exp(-|x - x2|**2 / delta)``; broadcasts over leading axes."""
    if not (delta > 0):
        raise ValueError(f"bandwidth must be positive, got {delta}")
    d = np.asarray(x, dtype=float) - np.asarray(x2, dtype=float)
    d2 = np.sum(d * d, axis=-1) if d.ndim else d * d
    return np.exp(-d2 / delta)


def support_radius(delta: float, eps_zero: float) -> float:
    """Distance beyond which the Gaussian falls below ``eps_zero``."""
    if eps_zero <= 0:
        return math.inf
    if eps_zero >= 1:
        return 0.0
    return math.sqrt(delta * math.log(1.0 / eps_zero))


def _as_points(pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] < 1:
        raise ValueError("point list must be nonempty")
    return pts


def gaussian_pairs(rows_pts, cols_pts, delta: float, eps_zero: float):
    """Row/col indices and raw Gaussian values of all pairs kept after truncation."""
    if not (delta > 0):
        raise ValueError(f"bandwidth must be positive, got {delta}")
    a, b = _as_points(rows_pts), _as_points(cols_pts)
    cutoff = support_radius(delta, eps_zero)
    if math.isinf(cutoff):
        i, j = np.meshgrid(np.arange(len(a)), np.arange(len(b)), indexing="ij")
        i, j = i.ravel(), j.ravel()
    else:
        pairs = cKDTree(a).sparse_distance_matrix(
            cKDTree(b), cutoff * (1 + TRUNCATION_RTOL) + 1e-300, output_type="ndarray"
        )
        i, j = pairs["i"].astype(np.int64), pairs["j"].astype(np.int64)
    d = a[i] - b[j]
    vals = np.exp(-np.sum(d * d, axis=1) / delta)
    keep = vals >= eps_zero * (1 - TRUNCATION_RTOL)
    return i[keep], j[keep], vals[keep]


def gaussian_matrix(rows_pts, cols_pts, delta: float, eps_zero: float) -> SparseKernelMatrix:
    i, j, v = gaussian_pairs(rows_pts, cols_pts, delta, eps_zero)
    shape = (len(_as_points(rows_pts)), len(_as_points(cols_pts)))
    return SparseKernelMatrix(sp.csr_matrix((v, (i, j)), shape=shape), eps_zero, RowKind.RAW)


def markov_normalize(raw: SparseKernelMatrix, weights=None) -> SparseKernelMatrix:
    """Scale rows so that ``sum_j K[i, j] * w_j`` is one; returns ``K[i, j] * w_j / row_sum``.

    ``weights`` defaults to the uniform empirical measure over columns.
    """
    mat = sp.csr_matrix(raw.matrix, dtype=float, copy=True)
    n = mat.shape[1]
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise ValueError(f"weights must have length {n}")
    if np.any(w < 0) or not np.isclose(w.sum(), 1.0, rtol=0, atol=1e-12):
        raise ValueError("weights must be a probability vector")
    mat = mat @ sp.diags(w)
    mat = sp.csr_matrix(mat)
    sums = np.asarray(mat.sum(axis=1)).ravel()
    if np.any(~(sums > 0)):
        bad = int(np.flatnonzero(~(sums > 0))[0])
        raise DegenerateRowError(f"row {bad} has no kernel mass; bandwidth too small for the grid")
    mat = sp.csr_matrix(sp.diags(1.0 / sums) @ mat)
    return SparseKernelMatrix(mat, raw.eps_zero, RowKind.MARKOV)


def gaussian_markov_matrix(points, delta: float, eps_zero: float, weights=None) -> SparseKernelMatrix:
    return markov_normalize(gaussian_matrix(points, points, delta, eps_zero), weights)


def degrees_from_raw(raw: SparseKernelMatrix) -> DegreeVectors:
    """Empirical-measure degrees of a square raw Gaussian matrix."""
    n = raw.nrows
    deg_r = np.asarray(raw.matrix.sum(axis=1)).ravel() / n
    if np.any(~(deg_r > 0)):
        raise DegenerateRowError("zero right degree")
    deg_l = (raw.matrix @ (1.0 / deg_r)) / n
    return DegreeVectors(deg_r, deg_l)


def _scale(raw: sp.spmatrix, left, right) -> sp.csr_matrix:
    coo = raw.tocoo()
    vals = coo.data * left[coo.row] * right[coo.col]
    return sp.csr_matrix((vals, (coo.row, coo.col)), shape=raw.shape)


def diffusion_kernel_matrix(points, delta2: float, eps_zero: float):
    """Diffusion kernel ``k(x,y) / (deg_l(x) deg_r(y))`` over ``points`` and its degrees."""
    raw = gaussian_matrix(points, points, delta2, eps_zero)
    deg = degrees_from_raw(raw)
    mat = _scale(raw.matrix, 1.0 / deg.deg_l, 1.0 / deg.deg_r)
    return SparseKernelMatrix(mat, eps_zero, RowKind.DIFFUSION), deg


def symmetrize(raw: SparseKernelMatrix, deg: DegreeVectors) -> SparseKernelMatrix:
    """Symmetric form ``k(x,y) / sqrt(deg_r(x) deg_l(x) deg_r(y) deg_l(y))`` of the diffusion kernel.

    ``raw`` is the truncated Gaussian the degrees were computed from.
    """
    s = 1.0 / np.sqrt(deg.deg_r * deg.deg_l)
    return SparseKernelMatrix(_scale(raw.matrix, s, s), raw.eps_zero, RowKind.DIFFUSION_SYMMETRIC)


def lattice_stencil(hx: float, hy: float, delta: float, eps_zero: float) -> np.ndarray:
    """Truncated Gaussian weights on pixel offsets, shape ``(2B+1, 2A+1)`` (rows are vertical)."""
    cutoff = support_radius(delta, eps_zero)
    if math.isinf(cutoff):
        raise ValueError("lattice stencil needs eps_zero > 0")
    ax = int(math.floor(cutoff * (1 + TRUNCATION_RTOL) / hx))
    by = int(math.floor(cutoff * (1 + TRUNCATION_RTOL) / hy))
    dy, dx = np.meshgrid(np.arange(-by, by + 1) * hy, np.arange(-ax, ax + 1) * hx, indexing="ij")
    w = np.exp(-(dx * dx + dy * dy) / delta)
    w[w < eps_zero * (1 - TRUNCATION_RTOL)] = 0.0
    return w


def lattice_degrees(m: int, n: int, length: float, width: float, delta: float, eps_zero: float) -> DegreeVectors:
    """Diffusion degrees over a full ``m x n`` pixel lattice by direct correlation.

    Avoids materialising the ``N x N`` Gaussian when the bandwidth is wide.
    """
    w = lattice_stencil(length / n, width / m, delta, eps_zero)
    N = m * n
    deg_r = scipy.ndimage.correlate(np.ones((m, n)), w, mode="constant", cval=0.0) / N
    deg_l = scipy.ndimage.correlate(1.0 / deg_r, w, mode="constant", cval=0.0) / N
    return DegreeVectors(deg_r.ravel(), deg_l.ravel())


@dataclass(frozen=True)
class GaussianKernel:
    delta: float


@dataclass(frozen=True)
class DiffusionKernel:
    """Diffusion kernel with degrees precomputed at the row and column points."""

    delta: float
    row_degrees: DegreeVectors
    col_degrees: DegreeVectors
    symmetric: bool = False


def kernel_cross_matrix(rows_pts, cols_pts, kernel, eps_zero: float) -> SparseKernelMatrix:
    """``K[i, j] = k(rows_pts[i], cols_pts[j])`` with the raw Gaussian truncated at ``eps_zero``."""
    raw = gaussian_matrix(rows_pts, cols_pts, kernel.delta, eps_zero)
    if isinstance(kernel, GaussianKernel):
        return raw
    if not isinstance(kernel, DiffusionKernel):
        raise TypeError(f"unknown kernel spec {kernel!r}")
    rd, cd = kernel.row_degrees, kernel.col_degrees
    if len(rd.deg_r) != raw.nrows or len(cd.deg_r) != raw.ncols:
        raise ValueError("degree vectors do not match the point lists")
    if kernel.symmetric:
        mat = _scale(raw.matrix, 1.0 / np.sqrt(rd.deg_r * rd.deg_l), 1.0 / np.sqrt(cd.deg_r * cd.deg_l))
        return SparseKernelMatrix(mat, eps_zero, RowKind.DIFFUSION_SYMMETRIC)
    mat = _scale(raw.matrix, 1.0 / rd.deg_l, 1.0 / cd.deg_r)
    return SparseKernelMatrix(mat, eps_zero, RowKind.DIFFUSION)
