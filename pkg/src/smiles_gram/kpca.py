"""Kernel PCA on a precomputed Gram matrix (training-set scores only)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = ["KpcaModel", "Embedding", "NotSymmetric", "DTooLarge", "center_kernel", "fit_kpca", "transform"]

RELATIVE_EIG_TOL = 1e-10


class NotSymmetric(ValueError):
    pass


class DTooLarge(UserWarning):
    """Requested more components than the centered kernel's numerical rank."""


@dataclass(frozen=True, eq=False)
class KpcaModel:
    centered_kernel: np.ndarray
    eigenvalues: np.ndarray  # retained, descending
    eigenvectors: np.ndarray  # N x rank, unit columns
    d: int

    @property
    def rank(self) -> int:
        return self.eigenvalues.size

    @property
    def components(self) -> np.ndarray:
        """Eigenvectors scaled by sqrt(eigenvalue); equal to the training scores."""
        return self.eigenvectors * np.sqrt(self.eigenvalues)


@dataclass(frozen=True, eq=False)
class Embedding:
    scores: np.ndarray

    @property
    def dimension(self) -> int:
        return self.scores.shape[1]


def center_kernel(K: np.ndarray) -> np.ndarray:
    """Double centering ``H K H`` with ``H = I - 11^T / N``."""
    row = K.mean(axis=1, keepdims=True)
    col = K.mean(axis=0, keepdims=True)
    Kc = K - row - col + K.mean()
    return 0.5 * (Kc + Kc.T)


def fit_kpca(K: np.ndarray, d: int = 100) -> KpcaModel:
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {K.shape}")
    n = K.shape[0]
    if not 1 <= d <= n:
        raise ValueError(f"d must be in [1, {n}], got {d}")
    asym = np.max(np.abs(K - K.T)) if n else 0.0
    if asym > 1e-8:
        raise NotSymmetric(f"kernel asymmetry {asym:.3g} exceeds 1e-8")

    Kc = center_kernel(K)
    vals, vecs = np.linalg.eigh(Kc)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]

    # relative cut, plus a floor at rounding level so an all-zero Kc has rank 0
    scale = np.max(np.abs(K)) if K.size else 0.0
    tol = max(RELATIVE_EIG_TOL * max(vals[0], 0.0), n * np.finfo(float).eps * scale)
    keep = int(np.count_nonzero(vals > tol))
    if keep < d:
        warnings.warn(f"d={d} exceeds numerical rank {keep}; scores are zero-padded", DTooLarge, stacklevel=2)
    keep = min(keep, d)
    vals, vecs = vals[:keep], vecs[:, :keep].copy()

    for j in range(keep):
        i = np.argmax(np.abs(vecs[:, j]))
        if vecs[i, j] < 0:
            vecs[:, j] = -vecs[:, j]
    return KpcaModel(Kc, vals, vecs, d)


def transform(model: KpcaModel) -> Embedding:
    """Training-set scores ``V sqrt(lambda)``, zero-padded to ``d`` columns."""
    n = model.centered_kernel.shape[0]
    scores = np.zeros((n, model.d))
    scores[:, : model.rank] = model.components
    return Embedding(scores)
