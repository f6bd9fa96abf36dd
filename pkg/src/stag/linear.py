"""Shared deterministic linear-model trainers.

Full-batch gradient/subgradient descent with zero initialization and a fixed
iteration count: the same inputs always produce the same weights, and
duplicating the training set leaves the (mean) gradient unchanged. Used by
the pairwise dedup/author scorers (logistic) and the field-of-study and
recommendation rankers (hinge).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse


@dataclass
class LinearModel:
    """Weights and bias of a trained linear scorer."""

    weights: np.ndarray
    bias: float

    def margin(self, x: np.ndarray) -> float:
        return float(np.dot(self.weights, x) + self.bias)

    def margins(self, x) -> np.ndarray:
        """Margins for a dense or CSR matrix of row vectors."""
        if sparse.issparse(x):
            return np.asarray(x @ self.weights).ravel() + self.bias
        return np.asarray(x) @ self.weights + self.bias


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def fit_logistic(
    features: np.ndarray,
    labels: np.ndarray,
    iterations: int = 400,
    learning_rate: float = 0.5,
    l2: float = 1e-4,
) -> LinearModel:
    """Logistic regression by deterministic full-batch gradient descent.

    ``labels`` are 0/1. Raises ValueError if the loss goes non-finite.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    n, d = x.shape
    w = np.zeros(d)
    b = 0.0
    for _ in range(iterations):
        p = _sigmoid(x @ w + b)
        err = p - y
        grad_w = x.T @ err / n + l2 * w
        grad_b = float(err.mean())
        w -= learning_rate * grad_w
        b -= learning_rate * grad_b
        if not (np.all(np.isfinite(w)) and np.isfinite(b)):
            raise ValueError("logistic training diverged to non-finite weights")
    return LinearModel(weights=w, bias=b)


def fit_hinge(
    x,
    labels: np.ndarray,
    sample_weight: np.ndarray | None = None,
    iterations: int = 300,
    learning_rate: float = 0.5,
    l2: float = 1e-4,
) -> LinearModel:
    """Linear SVM (hinge loss) by deterministic full-batch subgradient descent.

    ``x`` may be a dense array or CSR matrix; ``labels`` are +1/-1.
    """
    y = np.asarray(labels, dtype=np.float64)
    n = x.shape[0]
    sw = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    total = float(sw.sum())
    if total <= 0.0:
        raise ValueError("sample weights sum to zero")
    is_sparse = sparse.issparse(x)
    if not is_sparse:
        x = np.asarray(x, dtype=np.float64)
    w = np.zeros(x.shape[1])
    b = 0.0
    for _ in range(iterations):
        margins = (np.asarray(x @ w).ravel() if is_sparse else x @ w) + b
        viol = (y * margins) < 1.0
        coef = np.where(viol, -y * sw, 0.0)
        if is_sparse:
            grad_w = np.asarray(x.T @ coef).ravel() / total + l2 * w
        else:
            grad_w = x.T @ coef / total + l2 * w
        grad_b = float(coef.sum()) / total
        w -= learning_rate * grad_w
        b -= learning_rate * grad_b
        if not (np.all(np.isfinite(w)) and np.isfinite(b)):
            raise ValueError("hinge training diverged to non-finite weights")
    return LinearModel(weights=w, bias=b)


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Rank-based ROC AUC with tie averaging; 0.5 when one class is absent."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    pos = int((y == 1).sum())
    neg = len(y) - pos
    if pos == 0 or neg == 0:
        return 0.5
    order = np.argsort(s, kind="stable")
    ranks = np.empty(len(s), dtype=np.float64)
    sorted_scores = s[order]
    i = 0
    rank = 1.0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        avg = (rank + rank + (j - i)) / 2.0
        ranks[order[i : j + 1]] = avg
        rank += j - i + 1
        i = j + 1
    rank_sum = float(ranks[y == 1].sum())
    return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg)
