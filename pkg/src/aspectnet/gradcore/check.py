"""Central finite-difference oracle for analytic gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tensor, no_grad


def relative_discrepancy(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    return np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))


def numeric_gradient(fn: Callable[[Tensor], Tensor], point: np.ndarray, epsilon: float = 1e-6,
                     coords: np.ndarray | None = None) -> np.ndarray:
    x = np.array(point, dtype=np.float64)
    flat = x.reshape(-1)
    idx = np.arange(flat.size) if coords is None else np.asarray(coords)
    out = np.zeros(idx.size)
    with no_grad():
        for k, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + epsilon
            up = fn(Tensor(x)).item()
            flat[i] = orig - epsilon
            down = fn(Tensor(x)).item()
            flat[i] = orig
            out[k] = (up - down) / (2.0 * epsilon)
    return out


def analytic_gradient(fn: Callable[[Tensor], Tensor], point: np.ndarray) -> np.ndarray:
    x = Tensor(np.array(point, dtype=np.float64), requires_grad=True)
    loss = fn(x)
    loss.backward()
    return np.zeros_like(x.data) if x.grad is None else x.grad


def finite_difference_check(fn: Callable[[Tensor], Tensor], point, epsilon: float = 1e-6,
                            coords: np.ndarray | None = None) -> float:
    """Max relative discrepancy between backprop and central differences.

    ``fn`` maps a tensor shaped like ``point`` to a scalar tensor. ``coords``
    optionally restricts the comparison to a subset of flat coordinates.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    point = np.asarray(point, dtype=np.float64)
    analytic = analytic_gradient(fn, point).reshape(-1)
    if coords is not None:
        analytic = analytic[np.asarray(coords)]
    numeric = numeric_gradient(fn, point, epsilon, coords)
    if analytic.size == 0:
        return 0.0
    return float(relative_discrepancy(analytic, numeric).max())
