"""Gaussian distance matrix, probability normalization and Sinkhorn-Knopp
balancing into a doubly stochastic Gram matrix.

The balancing runs in the log domain. Each sweep forms the bipartite-graph
term ``(-delta*P + zeta*log a + zeta*log b) / zeta`` on top of ``log P`` and
rescales rows then columns toward the uniform marginal ``1/N``. The returned
kernel is ``diag(a) @ P @ diag(b)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.special import logsumexp

from .embeddings import FeatureVector

__all__ = [
    "GramPipelineConfig",
    "BalancedKernel",
    "GramError",
    "DimensionMismatch",
    "NonPositiveSigma",
    "NonPositiveEntry",
    "NonFiniteValue",
    "feature_matrix",
    "squared_distances",
    "median_sigma",
    "gaussian_distance_matrix",
    "normalize_to_probability",
    "bipartite_graph",
    "sinkhorn_balance",
    "build_gram",
    "kernel_value_between",
]

Features = Union[Sequence[FeatureVector], np.ndarray]


class GramError(ValueError):
    pass


class DimensionMismatch(GramError):
    pass


class NonPositiveSigma(GramError):
    pass


class NonPositiveEntry(GramError):
    pass


class NonFiniteValue(GramError):
    pass


@dataclass(frozen=True)
class GramPipelineConfig:
    sigma: float = 1.0
    zeta: float = 1.0
    delta: float = 1e-10
    xi: float = 1e-6
    max_iterations: int = 10_000
    sigma_mode: str = "fixed"  # or "median"

    def __post_init__(self):
        if not self.sigma > 0:
            raise NonPositiveSigma(f"sigma must be > 0, got {self.sigma}")
        if not self.zeta > 0:
            raise ValueError(f"zeta must be > 0, got {self.zeta}")
        if not self.delta > 0:
            raise ValueError(f"delta must be > 0, got {self.delta}")
        if not self.xi > 0:
            raise ValueError(f"xi must be > 0, got {self.xi}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.sigma_mode not in ("fixed", "median"):
            raise ValueError(f"sigma_mode must be 'fixed' or 'median', got {self.sigma_mode!r}")


@dataclass(frozen=True, eq=False)
class BalancedKernel:
    distance_matrix: np.ndarray
    probability_matrix: np.ndarray
    scaling_a: np.ndarray
    scaling_b: np.ndarray
    kernel: np.ndarray
    iterations_used: int
    converged: bool
    sigma: float = float("nan")
    residual_history: list[float] = field(default_factory=list, repr=False)

    @property
    def n(self) -> int:
        return self.kernel.shape[0]


def feature_matrix(features: Features) -> np.ndarray:
    """Stack feature vectors row-wise, checking they share one length."""
    if isinstance(features, np.ndarray):
        X = np.asarray(features, dtype=np.float64)
        if X.ndim != 2:
            raise DimensionMismatch("feature matrix must be 2-D")
        return X
    if len(features) == 0:
        raise DimensionMismatch("no feature vectors")
    lengths = {f.length for f in features}
    if len(lengths) != 1:
        raise DimensionMismatch(f"feature vectors have differing lengths {sorted(lengths)}")
    return np.vstack([f.values for f in features])


def squared_distances(X: np.ndarray) -> np.ndarray:
    sq = np.einsum("ij,ij->i", X, X)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    d2 = 0.5 * (d2 + d2.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def median_sigma(d2: np.ndarray) -> float:
    """Median heuristic: sigma**2 = median off-diagonal squared distance / 2."""
    iu = np.triu_indices(d2.shape[0], k=1)
    med = float(np.median(d2[iu]))
    if not med > 0:
        raise NonPositiveSigma("median heuristic gives sigma = 0 (most points coincide)")
    return float(np.sqrt(med / 2.0))


def _check_sigma(sigma: float):
    if not (np.isfinite(sigma) and sigma > 0):
        raise NonPositiveSigma(f"sigma must be a positive finite number, got {sigma}")


def _log_gaussian(features: Features, sigma: float) -> np.ndarray:
    X = feature_matrix(features)
    if X.shape[0] < 2:
        raise DimensionMismatch("need at least two feature vectors")
    _check_sigma(sigma)
    return -squared_distances(X) / (2.0 * sigma**2)


def gaussian_distance_matrix(features: Features, sigma: float) -> np.ndarray:
    """``D[i, j] = exp(-||f_i - f_j||**2 / (2 sigma**2))``; diagonal is exactly 1."""
    return np.exp(_log_gaussian(features, sigma))


def normalize_to_probability(D: np.ndarray, sigma: float = 1.0) -> np.ndarray:
    """Divide ``D`` by its grand total.

    A ``1/sigma`` factor on the numerator alone would break the unit total,
    and applied to both it cancels, so ``sigma`` is only validated.
    """
    _check_sigma(sigma)
    D = np.asarray(D, dtype=np.float64)
    if not np.all(np.isfinite(D)):
        raise NonFiniteValue("D contains non-finite entries")
    if np.any(D <= 0):
        raise NonPositiveEntry("D must be strictly positive")
    return D / D.sum()


def bipartite_graph(P, log_a, log_b, zeta: float, delta: float) -> np.ndarray:
    """``(-delta*P + zeta*log a + zeta*log b) / zeta``, broadcasting a over rows."""
    # overflow here surfaces as NonFiniteValue in the caller
    with np.errstate(over="ignore", invalid="ignore"):
        return (-delta * P + zeta * log_a[:, None] + zeta * log_b[None, :]) / zeta


def _balance_log(log_p: np.ndarray, config: GramPipelineConfig):
    n = log_p.shape[0]
    if log_p.shape != (n, n):
        raise DimensionMismatch(f"expected a square matrix, got shape {log_p.shape}")
    P = np.exp(log_p)
    log_target = -np.log(n)
    target = 1.0 / n
    log_a = np.zeros(n)
    log_b = np.zeros(n)
    a, b = np.ones(n), np.ones(n)
    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        plan = log_p + bipartite_graph(P, log_a, log_b, config.zeta, config.delta)
        # a1 / b1: row and column sums of the current plan, used to rescale a and b
        log_a = log_a + log_target - logsumexp(plan, axis=1)
        plan = log_p + bipartite_graph(P, log_a, log_b, config.zeta, config.delta)
        log_b = log_b + log_target - logsumexp(plan, axis=0)
        if not (np.all(np.isfinite(log_a)) and np.all(np.isfinite(log_b))):
            raise NonFiniteValue(f"scaling vectors became non-finite at iteration {it}")
        a_new, b_new = np.exp(log_a), np.exp(log_b)
        step = max(np.max(np.abs(a_new - a)), np.max(np.abs(b_new - b)))
        a, b = a_new, b_new
        K = np.exp(log_a[:, None] + log_p + log_b[None, :])
        residual = max(
            np.max(np.abs(K.sum(axis=1) - target)),
            np.max(np.abs(K.sum(axis=0) - target)),
        )
        history.append(float(residual))
        if step < config.xi and residual < config.xi:
            converged = True
            break
    # fix the free scale (a*c, b/c) so that a == b for symmetric input
    shift = 0.5 * (np.mean(log_b) - np.mean(log_a))
    log_a, log_b = log_a + shift, log_b - shift
    K = np.exp(log_a[:, None] + log_p + log_b[None, :])
    return np.exp(log_a), np.exp(log_b), K, it, converged, history


def sinkhorn_balance(P: np.ndarray, config: GramPipelineConfig | None = None) -> BalancedKernel:
    """Balance a strictly positive square matrix to uniform marginals 1/N."""
    config = config or GramPipelineConfig()
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise NonFiniteValue("P contains non-finite entries")
    if np.any(P <= 0):
        raise NonPositiveEntry("P must be strictly positive")
    a, b, K, it, converged, history = _balance_log(np.log(P), config)
    return BalancedKernel(
        distance_matrix=np.full_like(P, np.nan),
        probability_matrix=P,
        scaling_a=a,
        scaling_b=b,
        kernel=K,
        iterations_used=it,
        converged=converged,
        sigma=config.sigma,
        residual_history=history,
    )


def build_gram(features: Features, config: GramPipelineConfig | None = None) -> BalancedKernel:
    """Features -> Gaussian D -> probability P -> balanced, symmetrized K.

    Work is carried in log space, so D entries that underflow to 0 in the
    returned ``distance_matrix`` still contribute correctly to K.
    """
    config = config or GramPipelineConfig()
    X = feature_matrix(features)
    if X.shape[0] < 2:
        raise DimensionMismatch("need at least two feature vectors")
    d2 = squared_distances(X)
    sigma = median_sigma(d2) if config.sigma_mode == "median" else config.sigma
    _check_sigma(sigma)
    log_d = -d2 / (2.0 * sigma**2)
    log_p = log_d - logsumexp(log_d)
    a, b, K, it, converged, history = _balance_log(log_p, config)
    K = 0.5 * (K + K.T)
    return BalancedKernel(
        distance_matrix=np.exp(log_d),
        probability_matrix=np.exp(log_p),
        scaling_a=a,
        scaling_b=b,
        kernel=K,
        iterations_used=it,
        converged=converged,
        sigma=sigma,
        residual_history=history,
    )


def kernel_value_between(
    f1: FeatureVector,
    f2: FeatureVector,
    background: Sequence[FeatureVector],
    config: GramPipelineConfig | None = None,
) -> float:
    """``N * K[0, 1]`` for the Gram matrix over ``[f1, f2, *background]``."""
    feats = [f1, f2, *background]
    result = build_gram(feats, config)
    return float(result.n * result.kernel[0, 1])
