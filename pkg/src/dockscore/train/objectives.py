"""Training objective and the hit-classification F1 used for epoch selection."""

from __future__ import annotations

import math

import numpy as np

from .. import numeric as dn
from ..errors import ShapeError
from ..numeric import Tensor


def top_count(fraction: float, n: int) -> int:
    """ceil(fraction * n) with a guard against float representation noise."""
    return max(1, math.ceil(fraction * n - 1e-9))


def wmse_weights(y: np.ndarray, alpha: float) -> np.ndarray:
    return np.exp(-alpha * np.asarray(y, dtype=np.float64))


def wmse(z: Tensor, y: np.ndarray, alpha: float) -> Tensor:
    """Mean of e^(-alpha*y) * (z - y)^2, differentiable through z.

    Lower targets get exponentially larger weight, so errors on strong
    binders dominate the loss. alpha=0 reduces to plain MSE.
    """
    y = np.asarray(y, dtype=np.float64).reshape(z.data.shape)
    if y.size < 1:
        raise ShapeError("wmse needs at least one sample")
    diff = dn.sub(z, Tensor(y))
    weighted = dn.mul(Tensor(wmse_weights(y, alpha)), dn.mul(diff, diff))
    return dn.reduce_mean(weighted, axis=None)


def wmse_value(y: np.ndarray, z: np.ndarray, alpha: float) -> float:
    """Plain-array version for evaluation reports."""
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64).reshape(y.shape)
    if y.size < 1:
        raise ShapeError("wmse needs at least one sample")
    return float(np.mean(wmse_weights(y, alpha) * (z - y) ** 2))


def lowest_indices(values: np.ndarray, count: int) -> np.ndarray:
    """Indices of the `count` lowest values; ties break by ascending index."""
    order = np.argsort(values, kind="stable")
    return order[:count]


def f1_at_fraction(z: np.ndarray, y: np.ndarray, fraction: float) -> float:
    """F1 between the predicted and true bottom-`fraction` hit sets.

    Hits are the ceil(fraction*N) lowest scores on each side; ties break by
    ascending record index. Returns 0 when the sets are disjoint.
    """
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if z.shape != y.shape:
        raise ShapeError(f"prediction/target lengths differ: {z.shape} vs {y.shape}")
    if not 0.0 < fraction <= 0.5:
        raise ShapeError(f"hit fraction {fraction} outside (0, 0.5]")
    n = len(z)
    if n < math.ceil(1.0 / fraction):
        raise ShapeError(f"too few samples ({n}) for hit fraction {fraction}")
    m = top_count(fraction, n)
    true_hits = set(lowest_indices(y, m).tolist())
    pred_hits = set(lowest_indices(z, m).tolist())
    overlap = len(true_hits & pred_hits)
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_hits)
    recall = overlap / len(true_hits)
    return 2.0 * precision * recall / (precision + recall)
