"""Loss functions with analytic gradients."""

from __future__ import annotations

import numpy as np

from uisal.errors import ShapeError

BCE_CLAMP = 1e-7


def euclidean_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Summed squared error: loss = sum((pred - target)^2), grad = 2(pred - target)."""
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} vs target {target.shape}")
    diff = pred - target
    loss = float(np.dot(diff.reshape(-1).astype(np.float64), diff.reshape(-1).astype(np.float64)))
    return loss, 2.0 * diff


def bce_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross entropy against soft targets.

    Predictions are clamped to [1e-7, 1 - 1e-7] before the logarithm; the
    gradient is exactly the gradient of the clamped expression, so entries
    outside the clamp window get zero gradient.
    """
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} vs target {target.shape}")
    n = pred.size
    p = np.clip(pred, BCE_CLAMP, 1.0 - BCE_CLAMP)
    t = target
    loss = float(-np.mean(t * np.log(p) + (1.0 - t) * np.log1p(-p), dtype=np.float64))
    grad = (p - t) / (p * (1.0 - p)) / n
    grad = np.where((pred >= BCE_CLAMP) & (pred <= 1.0 - BCE_CLAMP), grad, 0.0)
    return loss, grad.astype(pred.dtype, copy=False)


def bce_entropy_floor(target: np.ndarray) -> float:
    """Minimum attainable mean BCE for the given soft targets (pred = target)."""
    t = np.clip(np.asarray(target, dtype=np.float64), BCE_CLAMP, 1.0 - BCE_CLAMP)
    return float(-np.mean(t * np.log(t) + (1.0 - t) * np.log1p(-t)))
