"""Training loss and the companion absolute-error metric."""

import numpy as np

from .ops import ShapeError, _as_f64


def mse_loss(pred, target):
    """Mean over all elements of squared error."""
    pred = _as_f64(pred)
    target = _as_f64(target)
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} != target {target.shape}")
    return float(np.mean((pred - target) ** 2))


def mae_metric(pred, target):
    """Mean over all elements of absolute error."""
    pred = _as_f64(pred)
    target = _as_f64(target)
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} != target {target.shape}")
    return float(np.mean(np.abs(pred - target)))


def mse_loss_grad(pred, target):
    """d(mse_loss)/d(pred)."""
    pred = _as_f64(pred)
    target = _as_f64(target)
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} != target {target.shape}")
    return (2.0 / pred.size) * (pred - target)
