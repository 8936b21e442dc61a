"""Evaluation protocol: seeded random splits, KNN classification, ridge
regression, the metric suite and the inter-class cosine heatmap."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

__all__ = [
    "SplitMix64",
    "Xoshiro256StarStar",
    "SplitSpec",
    "LabeledDataset",
    "EvalReport",
    "Heatmap",
    "KTooLarge",
    "LengthMismatch",
    "NonFiniteInput",
    "ZeroNormEmbedding",
    "random_split",
    "knn_classify",
    "ridge_regress",
    "roc_auc_binary",
    "classification_metrics",
    "regression_metrics",
    "class_similarity_heatmap",
    "run_experiment",
    "CLASSIFICATION_METRICS",
    "REGRESSION_METRICS",
    "TIMING_KEYS",
]

MASK64 = (1 << 64) - 1

CLASSIFICATION_METRICS = (
    "accuracy",
    "precision_weighted",
    "recall_weighted",
    "f1_weighted",
    "f1_macro",
    "roc_auc_ovr_macro",
    "train_time_seconds",
)
REGRESSION_METRICS = ("mae", "mse", "rmse", "r2", "evs", "train_time_seconds")
TIMING_KEYS = ("train_time_seconds",)


class KTooLarge(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class NonFiniteInput(ValueError):
    pass


class ZeroNormEmbedding(ValueError):
    pass


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256StarStar:
    def __init__(self, state: Sequence[int]):
        if len(state) != 4 or not any(state):
            raise ValueError("xoshiro256** needs four words, not all zero")
        self.s = [w & MASK64 for w in state]

    @classmethod
    def from_seed(cls, seed: int, stream: int = 0) -> "Xoshiro256StarStar":
        """Seed from splitmix64 outputs ``4*stream .. 4*stream+3``."""
        sm = SplitMix64(seed)
        for _ in range(4 * stream):
            sm.next()
        return cls([sm.next() for _ in range(4)])

    def next(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def below(self, bound: int) -> int:
        """Uniform integer in ``[0, bound)`` by rejection (no modulo bias)."""
        if bound < 1:
            raise ValueError("bound must be positive")
        threshold = (1 << 64) % bound
        while True:
            x = self.next()
            if x >= threshold:
                return x % bound

    def shuffle(self, items: list) -> list:
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]
        return items


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    repeats: int = 5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


def random_split(n: int, spec: SplitSpec, repeat_index: int) -> tuple[np.ndarray, np.ndarray]:
    """Shuffle ``0..n-1`` and cut at ``floor(train_fraction * n)``.

    The cut is clamped to ``[1, n-1]`` so neither side is empty. Both index
    arrays come back sorted.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if not 0 <= repeat_index < spec.repeats:
        raise ValueError(f"repeat_index must be in [0, {spec.repeats})")
    perm = Xoshiro256StarStar.from_seed(spec.seed, repeat_index).shuffle(list(range(n)))
    cut = min(max(int(np.floor(spec.train_fraction * n)), 1), n - 1)
    return np.sort(perm[:cut]), np.sort(perm[cut:])


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    embeddings: np.ndarray
    labels: np.ndarray
    class_names: tuple = ()

    def __post_init__(self):
        X = np.asarray(self.embeddings, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        labels = np.asarray(self.labels)
        if X.shape[0] != labels.shape[0]:
            raise LengthMismatch(f"{X.shape[0]} embeddings but {labels.shape[0]} labels")
        object.__setattr__(self, "embeddings", X)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @classmethod
    def for_classification(cls, embeddings, labels) -> "LabeledDataset":
        labels = np.asarray(labels)
        return cls(embeddings, labels, tuple(sorted(set(labels.tolist()))))

    @classmethod
    def for_regression(cls, embeddings, targets) -> "LabeledDataset":
        return cls(embeddings, np.asarray(targets, dtype=np.float64))

    def __len__(self) -> int:
        return self.embeddings.shape[0]

    def subset(self, idx: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(self.embeddings[idx], self.labels[idx], self.class_names)


def knn_classify(train: LabeledDataset, test_embeddings: np.ndarray, k: int = 5):
    """Euclidean k-NN with majority vote.

    Returns ``(predicted labels, scores)``; ``scores[i, c]`` is the fraction
    of the k neighbours in ``train.class_names[c]``. Distance ties go to the
    lower training index; vote ties go to the tied class whose member is
    nearest.
    """
    n = len(train)
    if not 1 <= k <= n:
        raise KTooLarge(f"k={k} but only {n} training points")
    classes = train.class_names or tuple(sorted(set(train.labels.tolist())))
    class_index = {c: i for i, c in enumerate(classes)}
    train_cls = np.array([class_index[c] for c in train.labels.tolist()])
    T = np.asarray(test_embeddings, dtype=np.float64)
    if T.ndim == 1:
        T = T[:, None]
    preds = []
    scores = np.zeros((T.shape[0], len(classes)))
    for row, x in enumerate(T):
        dist = np.sum((train.embeddings - x) ** 2, axis=1)
        nearest = np.argsort(dist, kind="stable")[:k]
        votes = np.bincount(train_cls[nearest], minlength=len(classes))
        top = votes.max()
        winner = next(c for c in train_cls[nearest] if votes[c] == top)
        preds.append(classes[winner])
        scores[row] = votes / k
    return np.array(preds, dtype=train.labels.dtype), scores


def ridge_regress(train: LabeledDataset, test_embeddings: np.ndarray, alpha: float = 1.0) -> np.ndarray:
    """Ridge on centred data with an unpenalised intercept; ``alpha=0`` is
    minimum-norm least squares."""
    X = train.embeddings
    y = np.asarray(train.labels, dtype=np.float64)
    T = np.asarray(test_embeddings, dtype=np.float64)
    if T.ndim == 1:
        T = T[:, None]
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    for name, arr in (("training embeddings", X), ("targets", y), ("test embeddings", T)):
        if not np.all(np.isfinite(arr)):
            raise NonFiniteInput(f"{name} contain non-finite values")
    x_mean, y_mean = X.mean(axis=0), y.mean()
    Xc, yc = X - x_mean, y - y_mean
    if alpha == 0:
        w = np.linalg.lstsq(Xc, yc, rcond=None)[0]
    else:
        w = np.linalg.solve(Xc.T @ Xc + alpha * np.eye(X.shape[1]), Xc.T @ yc)
    return (T - x_mean) @ w + y_mean


def roc_auc_binary(is_positive: np.ndarray, score: np.ndarray) -> float:
    """Mann-Whitney AUC with midranks for tied scores."""
    is_positive = np.asarray(is_positive, dtype=bool)
    n_pos = int(is_positive.sum())
    n_neg = is_positive.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positives and negatives")
    ranks = rankdata(score)
    return float((ranks[is_positive].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def classification_metrics(y_true, y_pred, scores=None, class_names: Optional[Sequence] = None) -> dict:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise LengthMismatch(f"{y_true.size} true labels vs {y_pred.size} predictions")
    if y_true.size == 0:
        raise LengthMismatch("no samples")

    labels = sorted(set(y_true.tolist()) | set(y_pred.tolist()))
    idx = {c: i for i, c in enumerate(labels)}
    t = np.array([idx[c] for c in y_true.tolist()])
    p = np.array([idx[c] for c in y_pred.tolist()])
    cm = np.zeros((len(labels), len(labels)), dtype=np.int64)
    np.add.at(cm, (t, p), 1)

    tp = np.diag(cm).astype(float)
    predicted = cm.sum(axis=0).astype(float)
    support = cm.sum(axis=1).astype(float)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, support, out=np.zeros_like(tp), where=support > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    weights = support / support.sum()

    out = {
        "accuracy": float(tp.sum() / y_true.size),
        "precision_weighted": float(weights @ precision),
        "recall_weighted": float(weights @ recall),
        "f1_weighted": float(weights @ f1),
        "f1_macro": float(f1.mean()),
        "roc_auc_ovr_macro": None,
    }

    if scores is not None:
        scores = np.asarray(scores, dtype=np.float64)
        if class_names is None:
            class_names = labels
        class_names = list(class_names)
        if scores.shape != (y_true.size, len(class_names)):
            raise LengthMismatch(f"scores shape {scores.shape} does not match labels/classes")
        if np.any(np.abs(scores.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("class score rows must sum to 1")
        aucs = []
        for j, c in enumerate(class_names):
            positive = y_true == c
            if 0 < positive.sum() < y_true.size:
                aucs.append(roc_auc_binary(positive, scores[:, j]))
        if aucs:
            out["roc_auc_ovr_macro"] = float(np.mean(aucs))
    return out


def regression_metrics(y_true, y_pred) -> dict:
    """MAE, MSE, RMSE, R2 and explained variance.

    Constant ``y_true`` leaves R2 and EVS undefined: they come back as
    ``None`` and ``zero_variance`` is set.
    """
    y = np.asarray(y_true, dtype=np.float64)
    yhat = np.asarray(y_pred, dtype=np.float64)
    if y.shape != yhat.shape:
        raise LengthMismatch(f"{y.size} true values vs {yhat.size} predictions")
    if y.size < 2:
        raise LengthMismatch("need at least two samples")
    resid = y - yhat
    mse = float(np.mean(resid**2))
    out = {
        "mae": float(np.mean(np.abs(resid))),
        "mse": mse,
        "rmse": float(np.sqrt(mse)),
        "r2": None,
        "evs": None,
    }
    var_y = float(np.var(y))
    if var_y == 0.0:
        out["zero_variance"] = True
        return out
    out["r2"] = float(1.0 - np.sum(resid**2) / np.sum((y - y.mean()) ** 2))
    out["evs"] = float(1.0 - np.var(resid) / var_y)
    return out


@dataclass(frozen=True, eq=False)
class Heatmap:
    matrix: np.ndarray
    class_names: tuple
    degenerate: bool = False


def class_similarity_heatmap(embeddings: np.ndarray, labels, class_names: Optional[Sequence] = None) -> Heatmap:
    """Mean cosine similarity between class members, min-max scaled to [0, 1].

    Within-class blocks skip self-pairs; a singleton class has no such pair
    and its diagonal entry is 1 (self-similarity). A constant matrix scales
    to all zeros and is flagged ``degenerate``.
    """
    Z = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels)
    if Z.shape[0] != labels.size:
        raise LengthMismatch("embeddings and labels differ in length")
    norms = np.linalg.norm(Z, axis=1)
    if np.any(norms == 0):
        raise ZeroNormEmbedding(f"zero-norm embedding at row {int(np.argmax(norms == 0))}")
    U = Z / norms[:, None]
    S = U @ U.T
    names = tuple(class_names) if class_names is not None else tuple(sorted(set(labels.tolist())))
    members = [np.flatnonzero(labels == c) for c in names]
    if any(m.size == 0 for m in members):
        raise ValueError("every class needs at least one member")
    C = len(names)
    M = np.zeros((C, C))
    for p in range(C):
        for q in range(p, C):
            block = S[np.ix_(members[p], members[q])]
            if p == q:
                m = members[p].size
                value = 1.0 if m == 1 else (block.sum() - np.trace(block)) / (m * (m - 1))
            else:
                value = block.mean()
            M[p, q] = M[q, p] = value
    lo, hi = M.min(), M.max()
    if hi - lo == 0:
        return Heatmap(np.zeros_like(M), names, degenerate=True)
    return Heatmap((M - lo) / (hi - lo), names)


@dataclass
class EvalReport:
    task: str
    per_repeat: list[dict] = field(default_factory=list)
    mean: dict = field(default_factory=dict)

    def to_dict(self, include_timing: bool = True) -> dict:
        def strip(m):
            return {k: v for k, v in m.items() if include_timing or k not in TIMING_KEYS}

        return {
            "task": self.task,
            "repeats": len(self.per_repeat),
            "mean": strip(self.mean),
            "per_repeat": [strip(m) for m in self.per_repeat],
        }

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2) + "\n"


def _average(per_repeat: list[dict]) -> dict:
    mean = {}
    for key in per_repeat[0]:
        values = [m[key] for m in per_repeat if isinstance(m.get(key), (int, float)) and not isinstance(m[key], bool)]
        if key == "zero_variance":
            mean[key] = any(m.get(key) for m in per_repeat)
        else:
            mean[key] = float(np.mean(values)) if values else None
    return mean


def run_experiment(
    dataset: LabeledDataset,
    spec: SplitSpec = SplitSpec(),
    task: str = "classify",
    *,
    knn_k: int = 5,
    ridge_alpha: float = 1.0,
) -> EvalReport:
    if task not in ("classify", "regress"):
        raise ValueError(f"task must be 'classify' or 'regress', got {task!r}")
    n = len(dataset)
    per_repeat = []
    for r in range(spec.repeats):
        train_idx, test_idx = random_split(n, spec, r)
        train, test = dataset.subset(train_idx), dataset.subset(test_idx)
        start = time.perf_counter()
        if task == "classify":
            pred, scores = knn_classify(train, test.embeddings, knn_k)
            elapsed = time.perf_counter() - start
            metrics = classification_metrics(test.labels, pred, scores, dataset.class_names)
        else:
            pred = ridge_regress(train, test.embeddings, ridge_alpha)
            elapsed = time.perf_counter() - start
            metrics = regression_metrics(test.labels, pred)
        metrics["train_time_seconds"] = elapsed
        per_repeat.append(metrics)
    # zero_variance may appear in only some repeats
    keys = list(dict.fromkeys(k for m in per_repeat for k in m))
    per_repeat = [{k: m.get(k, False if k == "zero_variance" else None) for k in keys} for m in per_repeat]
    return EvalReport(task, per_repeat, _average(per_repeat))
