"""Forward primitives and their vector-Jacobian products.

Binary elementwise ops accept equal shapes, a trailing-dims bias (row vector
added to every row), a scalar, or a size-1 axis (masks shaped ``(B, 1)``).
Anything else is a :class:`ShapeError` naming both shapes.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import tensor as _tensor
from .tensor import ShapeError, Tensor, as_tensor

# -- helpers -------------------------------------------------------------------


def _broadcast_shape(a: tuple, b: tuple, op: str) -> tuple:
    try:
        return np.broadcast_shapes(a, b)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a} and {b}") from None


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    lead = g.ndim - len(shape)
    if lead > 0:
        g = g.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- elementwise arithmetic ----------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a.shape, b.shape, "add")
    sa, sb = a.shape, b.shape
    return Tensor.from_op(
        a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add"
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a.shape, b.shape, "sub")
    sa, sb = a.shape, b.shape
    return Tensor.from_op(
        a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)), "sub"
    )


def neg(a) -> Tensor:
    a = as_tensor(a)
    return Tensor.from_op(-a.data, (a,), lambda g: (-g,), "neg")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a.shape, b.shape, "mul")
    ad, bd = a.data, b.data

    def back(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return Tensor.from_op(ad * bd, (a, b), back, "mul")


def matmul(a, b) -> Tensor:
    """Matrix product over the last two axes; a 2-D right operand is shared by all batches."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data

    def back(g):
        ga = g @ np.swapaxes(bd, -1, -2)
        if bd.ndim == 2 and ad.ndim > 2:
            gb = ad.reshape(-1, ad.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        else:
            gb = _unbroadcast(np.swapaxes(ad, -1, -2) @ g, bd.shape)
        return _unbroadcast(ga, ad.shape), gb

    return Tensor.from_op(ad @ bd, (a, b), back, "matmul")


# -- structural ops --------------------------------------------------------------


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError(f"concat: incompatible shapes {[t.shape for t in tensors]}") from None
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def back(g):
        return np.split(g, sizes, axis=axis)

    return Tensor.from_op(out, tensors, back, "concat")


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.stack([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError(f"stack: incompatible shapes {[t.shape for t in tensors]}") from None

    def back(g):
        return [np.take(g, i, axis=axis) for i in range(len(tensors))]

    return Tensor.from_op(out, tensors, back, "stack")


def slice(a, index) -> Tensor:  # noqa: A001 - mirrors the primitive's name
    a = as_tensor(a)
    shape = a.shape

    def back(g):
        full = np.zeros(shape, dtype=g.dtype)
        np.add.at(full, index, g) if _is_fancy(index) else full.__setitem__(index, g)
        return (full,)

    return Tensor.from_op(a.data[index], (a,), back, "slice")


def _is_fancy(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return any(isinstance(i, (list, np.ndarray)) for i in items)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    return Tensor.from_op(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),), "reshape")


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    inv = np.argsort(axes)
    return Tensor.from_op(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),), "transpose")


def sum(a, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    shape = a.shape

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return Tensor.from_op(np.sum(a.data, axis=axis, keepdims=keepdims), (a,), back, "sum")


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    n = a.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / n)


# -- nonlinearities ----------------------------------------------------------------


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    # split by sign keeps exp from overflowing
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return Tensor.from_op(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return Tensor.from_op(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def relu(a) -> Tensor:
    a = as_tensor(a)
    keep = a.data > 0
    return Tensor.from_op(a.data * keep, (a,), lambda g: (g * keep,), "relu")


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return Tensor.from_op(out, (a,), lambda g: (g * out,), "exp")


def log(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    return Tensor.from_op(np.log(x), (a,), lambda g: (g / x,), "log")


def softmax(a, axis: int = -1, mask: np.ndarray | None = None) -> Tensor:
    """Softmax along ``axis``.

    ``mask`` (boolean, broadcastable, True = keep) acts as -inf logits on the
    masked entries. A row with every entry masked comes out all zeros.
    """
    a = as_tensor(a)
    x = a.data
    if mask is not None:
        mask = np.broadcast_to(mask, x.shape)
        x = np.where(mask, x, -np.inf)
        mx = np.max(x, axis=axis, keepdims=True)
        mx = np.where(np.isfinite(mx), mx, 0.0)
        e = np.where(mask, np.exp(x - mx), 0.0)
        s = np.sum(e, axis=axis, keepdims=True)
        out = e / np.where(s > 0, s, 1.0)
    else:
        e = np.exp(x - np.max(x, axis=axis, keepdims=True))
        out = e / np.sum(e, axis=axis, keepdims=True)

    def back(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return Tensor.from_op(out, (a,), back, "softmax")


def log_softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    x = a.data
    shifted = x - np.max(x, axis=axis, keepdims=True)
    lse = np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
    out = shifted - lse
    probs = np.exp(out)
    return Tensor.from_op(
        out, (a,), lambda g: (g - probs * np.sum(g, axis=axis, keepdims=True),), "log_softmax"
    )


def layer_norm(a, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale by ``gamma`` and shift by ``beta``."""
    a, gamma, beta = as_tensor(a), as_tensor(gamma), as_tensor(beta)
    if gamma.shape != (a.shape[-1],) or beta.shape != (a.shape[-1],):
        raise ShapeError(f"layer_norm: input {a.shape} with gamma {gamma.shape}, beta {beta.shape}")
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    gd = gamma.data

    def back(g):
        gx = g * gd
        dx = inv * (gx - gx.mean(axis=-1, keepdims=True) - xhat * (gx * xhat).mean(axis=-1, keepdims=True))
        red = tuple(range(x.ndim - 1))
        return dx, (g * xhat).sum(axis=red), g.sum(axis=red)

    return Tensor.from_op(xhat * gd + beta.data, (a, gamma, beta), back, "layer_norm")


def embedding_lookup(table, ids: np.ndarray) -> Tensor:
    """Rows of ``table`` indexed by the integer array ``ids``; output shape ``ids.shape + (D,)``."""
    table = as_tensor(table)
    ids = np.asarray(ids)
    if table.ndim != 2:
        raise ShapeError(f"embedding_lookup: table must be 2-D, got {table.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"embedding_lookup: index out of range for table {table.shape}")
    shape = table.shape

    def back(g):
        full = np.zeros(shape, dtype=g.dtype)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, shape[1]))
        return (full,)

    return Tensor.from_op(table.data[ids], (table,), back, "embedding_lookup")


def dropout(a, rate: float, rng: np.random.Generator | None = None, training: bool = True,
            mask: np.ndarray | None = None) -> Tensor:
    """Inverted dropout: kept units are scaled by 1/(1-rate) so the expectation is unchanged.

    Identity when ``rate == 0`` or not training. A precomputed ``mask`` (already
    scaled) can be passed to reuse one draw across time steps.
    """
    a = as_tensor(a)
    if not training or rate == 0.0:
        return a
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if mask is None:
        mask = dropout_mask(a.shape, rate, rng)
    return mul(a, mask)


def dropout_mask(shape, rate: float, rng: np.random.Generator) -> np.ndarray:
    return (rng.random(shape) >= rate).astype(_tensor.DTYPE) / (1.0 - rate)


def cross_entropy(logits, target: np.ndarray, weight: np.ndarray | None = None) -> Tensor:
    """Mean negative log-likelihood of integer ``target`` under softmax(``logits``).

    ``weight`` (same shape as ``target``) selects/weights the items; the mean is
    taken over the total weight. The gradient is (probabilities - one_hot) * w / sum(w).
    """
    logits = as_tensor(logits)
    target = np.asarray(target, dtype=np.int64)
    if logits.shape[:-1] != target.shape:
        raise ShapeError(f"cross_entropy: logits {logits.shape} vs target {target.shape}")
    w = np.ones(target.shape, dtype=_tensor.DTYPE) if weight is None else np.asarray(weight, dtype=_tensor.DTYPE)
    if w.shape != target.shape:
        raise ShapeError(f"cross_entropy: weight {w.shape} vs target {target.shape}")
    total = w.sum()
    if total <= 0:
        raise ValueError("cross_entropy: total weight must be positive")
    x = logits.data
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    z = e.sum(axis=-1, keepdims=True)
    logp = shifted - np.log(z)
    picked = np.take_along_axis(logp, target[..., None], axis=-1)[..., 0]
    loss = -(w * picked).sum() / total

    def back(g):
        probs = e / z
        onehot = np.zeros_like(probs)
        np.put_along_axis(onehot, target[..., None], 1.0, axis=-1)
        return ((probs - onehot) * (w / total)[..., None] * g,)

    return Tensor.from_op(np.asarray(loss, dtype=_tensor.DTYPE), (logits,), back, "cross_entropy")
