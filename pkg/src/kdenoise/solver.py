"""Ridge-regularised least squares and spectral-norm estimation."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp


class SingularSystemError(np.linalg.LinAlgError):
    pass


class SolverMode(str, enum.Enum):
    DENSE_DIRECT = "dense_direct"
    RANDOMIZED_SVD = "randomized_svd"


@dataclass(frozen=True)
class SolverPolicy:
    mode: SolverMode = SolverMode.DENSE_DIRECT
    rank: int | None = None  # randomized path; None -> min(A.shape)
    oversampling: int = 10
    power_iterations: int = 2
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", SolverMode(self.mode))
        if self.rank is not None and self.rank < 1:
            raise ValueError("svd rank must be >= 1")
        if self.oversampling < 0 or self.power_iterations < 0:
            raise ValueError("oversampling and power iterations must be >= 0")


@dataclass(frozen=True)
class RidgeProblem:
    A: object
    y: np.ndarray
    theta: float

    def __post_init__(self):
        if self.theta < 0:
            raise ValueError("theta must be nonnegative")
        if self.A.shape[0] != np.shape(self.y)[0]:
            raise ValueError(f"rhs length {np.shape(self.y)[0]} != design rows {self.A.shape[0]}")


def _dense(A) -> np.ndarray:
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


def randomized_svd(A, rank: int, oversampling: int = 10, power_iterations: int = 2, seed: int = 0):
    """Rank-``rank`` truncated SVD via a Gaussian range finder with subspace iteration."""
    m, n = A.shape
    if rank > min(m, n):
        raise ValueError(f"rank {rank} exceeds min dimension {min(m, n)}")
    k = min(rank + oversampling, m, n)
    rng = np.random.Generator(np.random.PCG64(seed))
    Q, _ = np.linalg.qr(A @ rng.standard_normal((n, k)))
    for _ in range(power_iterations):
        Z, _ = np.linalg.qr(A.T @ Q)
        Q, _ = np.linalg.qr(A @ Z)
    B = np.asarray(A.T @ Q).T
    Ub, s, Vt = np.linalg.svd(B, full_matrices=False)
    U = Q @ Ub
    return U[:, :rank], s[:rank], Vt[:rank]


class RidgeSolver:
    """Factorisation of ``A^T A + theta*I`` reused across right-hand sides."""

    def __init__(self, A, theta: float, policy: SolverPolicy | None = None):
        if theta < 0:
            raise ValueError("theta must be nonnegative")
        self.policy = policy or SolverPolicy()
        self.theta = float(theta)
        self.A = A
        self.shape = A.shape
        if self.policy.mode is SolverMode.DENSE_DIRECT:
            self._factor_dense()
        else:
            self._factor_svd()

    def _factor_dense(self):
        Ad = _dense(self.A)
        gram = Ad.T @ Ad
        self.gram_norm = float(np.linalg.norm(gram, 2)) if gram.size else 0.0
        gram[np.diag_indices_from(gram)] += self.theta
        try:
            self._cho = scipy.linalg.cho_factor(gram, lower=False, check_finite=True)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError("normal matrix is not positive definite") from exc
        if self.theta == 0:
            d = np.abs(np.diag(self._cho[0]))
            if d.min() <= np.finfo(float).eps * d.max() * max(self.shape):
                raise SingularSystemError("A^T A is numerically singular and theta = 0")
        self._gram = gram

    def _factor_svd(self):
        p = self.policy
        rank = p.rank if p.rank is not None else min(self.shape)
        U, s, Vt = randomized_svd(self.A, rank, p.oversampling, p.power_iterations, p.seed)
        if self.theta == 0 and s.min() <= np.finfo(float).eps * s.max() * max(self.shape):
            raise SingularSystemError("design matrix is rank deficient and theta = 0")
        self._U, self._filt, self._Vt = U, s / (s * s + self.theta), Vt

    def solve(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.policy.mode is SolverMode.DENSE_DIRECT:
            return scipy.linalg.cho_solve(self._cho, np.asarray(self.A.T @ y))
        return self._Vt.T @ (self._filt * (self._U.T @ y))

    def condition_estimate(self) -> float:
        """2-norm condition number of the regularised normal matrix."""
        if self.policy.mode is SolverMode.DENSE_DIRECT:
            ev = np.linalg.eigvalsh(self._gram)
            return float(ev[-1] / ev[0]) if ev[0] > 0 else float("inf")
        s2 = 1.0 / self._filt * (self._filt > 0)
        return float(s2.max() / s2.min()) if s2.min() > 0 else float("inf")


def ridge_solve(prob: RidgeProblem, policy: SolverPolicy | None = None) -> np.ndarray:
    """``argmin_x |Ax - y|^2 + theta |x|^2``, i.e. ``(A^T A + theta I)^{-1} A^T y``."""
    return RidgeSolver(prob.A, prob.theta, policy).solve(prob.y)


def spectral_norm(A, iterations: int = 5000, seed: int = 0, tol: float = 1e-14) -> float:
    """Largest singular value of ``A`` by power iteration on ``A^T A``.

    The Rayleigh quotient is nondecreasing in the iteration count; iteration
    stops once its relative change drops below ``tol``.
    """
    n = A.shape[1]
    rng = np.random.Generator(np.random.PCG64(seed))
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iterations):
        w = np.asarray(A.T @ (A @ v)).ravel()
        lam_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        if abs(lam_new - lam) <= tol * lam_new:
            lam = lam_new
            break
        lam = lam_new
    return float(np.sqrt(max(lam, 0.0)))
