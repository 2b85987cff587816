"""Matrix smoothness factors and heterogeneity diagnostics.

A function f is matrix-smooth with factor L (symmetric PSD) when

    f(x) <= f(y) + <grad f(y), x - y> + 0.5 * ||x - y||_L^2.

The scalar constant is recovered as lambda_max(L).  All downstream
machinery (whitened compression, optimal quantization steps, bit
accounting) consumes the eigendecomposition through this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyData, NotPSD, NotSymmetric, RankOutOfRange

# Relative eigenvalue cutoff: anything below SPECTRAL_TOL * lambda_max is
# treated as an exact zero of the spectrum.
SPECTRAL_TOL = 1e-10


@dataclass(frozen=True)
class SmoothnessFactor:
    """Eigendecomposed PSD smoothness matrix with cached square roots."""

    matrix: np.ndarray
    sqrt: np.ndarray
    pinv_sqrt: np.ndarray
    diag: np.ndarray
    lambda_max: float
    rank: int

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def pinv(self) -> np.ndarray:
        """Moore-Penrose pseudo-inverse of the factor."""
        return self.pinv_sqrt @ self.pinv_sqrt

    def dual_sqnorm(self, v: np.ndarray) -> float:
        """||v||^2 with respect to pinv(L), the dual of the L-norm."""
        w = self.pinv_sqrt @ v
        return float(w @ w)

    def sqnorm(self, v: np.ndarray) -> float:
        """||v||_L^2 = v' L v."""
        return float(v @ (self.matrix @ v))


@dataclass(frozen=True)
class HeterogeneityStats:
    """Spread of smoothness information across workers and coordinates.

    nu  = sum_i L_i / max_i L_i, in [1, n]: how much scalar smoothness
          varies across workers.
    nu1 = max_i sum_j L_{i,jj} / max_j L_{i,jj}, in [1, d]: how much the
          diagonal varies across coordinates for the worst worker.
    """

    nu: float
    nu1: float
    l_max: float


def build_factor(matrix: np.ndarray, tol: float = SPECTRAL_TOL) -> SmoothnessFactor:
    """Validate a symmetric PSD matrix and precompute its square roots.

    Eigenvalues below tol * lambda_max are treated as zero for the rank
    and the pseudo-inverse; a negative eigenvalue beyond that cutoff
    raises NotPSD.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {matrix.shape}")
    scale = np.abs(matrix).max() if matrix.size else 0.0
    if np.abs(matrix - matrix.T).max(initial=0.0) > 1e-10 * max(scale, 1e-300):
        raise NotSymmetric("matrix is not symmetric within 1e-10 relative tolerance")
    sym = 0.5 * (matrix + matrix.T)

    eigvals, eigvecs = np.linalg.eigh(sym)
    lam_max = float(max(eigvals.max(initial=0.0), 0.0))
    cutoff = tol * lam_max
    if eigvals.min(initial=0.0) < -cutoff:
        raise NotPSD(f"most negative eigenvalue {eigvals.min():.3e} exceeds cutoff")

    clipped = np.where(eigvals > cutoff, eigvals, 0.0)
    rank = int(np.count_nonzero(clipped))
    root = np.sqrt(clipped)
    inv_root = np.divide(1.0, root, out=np.zeros_like(root), where=root > 0)
    sqrt = (eigvecs * root) @ eigvecs.T
    pinv_sqrt = (eigvecs * inv_root) @ eigvecs.T
    # Symmetrize against roundoff so sqrt factors are exactly symmetric.
    sqrt = 0.5 * (sqrt + sqrt.T)
    pinv_sqrt = 0.5 * (pinv_sqrt + pinv_sqrt.T)
    diag = np.clip(np.diag(sym), 0.0, None)

    for arr in (sym, sqrt, pinv_sqrt, diag):
        arr.setflags(write=False)
    return SmoothnessFactor(
        matrix=sym,
        sqrt=sqrt,
        pinv_sqrt=pinv_sqrt,
        diag=diag,
        lambda_max=lam_max,
        rank=rank,
    )


def identity_factor(dim: int, scale: float = 1.0) -> SmoothnessFactor:
    """Factor for the scalar-smoothness special case L = scale * I."""
    if scale < 0:
        raise NotPSD("scale must be nonnegative")
    return build_factor(scale * np.eye(dim))


def glm_smoothness(rows: np.ndarray, l2: float) -> SmoothnessFactor:
    """Smoothness factor of an l2-regularized logistic loss.

    For data rows a_1, ..., a_m the loss is (1/(4m)) sum a_t a_t' + l2 * I
    smooth; the 1/4 comes from the curvature bound of log(1 + e^-t).
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise EmptyData("need at least one data row")
    m = rows.shape[0]
    mat = rows.T @ rows / (4.0 * m) + l2 * np.eye(rows.shape[1])
    return build_factor(mat)


def global_factor(factors: list[SmoothnessFactor]) -> SmoothnessFactor:
    """Factor of the average objective: the mean of the worker matrices."""
    if not factors:
        raise EmptyData("need at least one worker factor")
    dim = factors[0].dim
    for fac in factors:
        if fac.dim != dim:
            raise DimensionMismatch("worker factors have different dimensions")
    mean = sum(fac.matrix for fac in factors) / len(factors)
    return build_factor(mean)


def heterogeneity(factors: list[SmoothnessFactor]) -> HeterogeneityStats:
    """Worker-level (nu) and coordinate-level (nu1) smoothness spread."""
    if not factors:
        raise EmptyData("need at least one worker factor")
    lams = np.array([fac.lambda_max for fac in factors])
    l_max = float(lams.max())
    nu = float(lams.sum() / l_max) if l_max > 0 else float(len(factors))

    nu1 = 1.0
    for fac in factors:
        peak = fac.diag.max(initial=0.0)
        ratio = float(fac.diag.sum() / peak) if peak > 0 else float(fac.dim)
        nu1 = max(nu1, ratio)
    return HeterogeneityStats(nu=nu, nu1=nu1, l_max=l_max)


def lowrank_overapprox(factor: SmoothnessFactor, rank: int) -> SmoothnessFactor:
    """Rank-r over-approximation: keep the top-r eigenspace, lift the rest.

    Returns sum_{k<=r} (lam_k - lam_{r+1}) u_k u_k' + lam_{r+1} I, which
    dominates the original matrix in the PSD order and is exact when
    rank = dim - 1 (and an inflation to lam_max * I when rank = 0).
    """
    d = factor.dim
    if not 0 <= rank < d:
        raise RankOutOfRange(f"rank must lie in [0, {d - 1}], got {rank}")
    eigvals, eigvecs = np.linalg.eigh(factor.matrix)
    order = np.argsort(eigvals)[::-1]
    eigvals, eigvecs = eigvals[order], eigvecs[:, order]
    floor = eigvals[rank]
    top = eigvecs[:, :rank]
    mat = (top * (eigvals[:rank] - floor)) @ top.T + floor * np.eye(d)
    return build_factor(mat)
