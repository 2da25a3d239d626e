"""Post-norm transformer encoder trained from scratch, with learned positions."""

from __future__ import annotations

import numpy as np

from ..gradcore import Module, ShapeError, Tensor, ops
from .layers import LayerNorm, Linear


class MultiHeadAttention(Module):
    def __init__(self, rng: np.random.Generator, width: int, heads: int):
        super().__init__()
        if width % heads:
            raise ValueError(f"width {width} not divisible by {heads} heads")
        self.width, self.heads, self.head_dim = width, heads, width // heads
        self.q = self.add_child("q", Linear(rng, width, width))
        self.k = self.add_child("k", Linear(rng, width, width))
        self.v = self.add_child("v", Linear(rng, width, width))
        self.o = self.add_child("o", Linear(rng, width, width))

    def _split(self, x: Tensor) -> Tensor:
        B, T, _ = x.shape
        return ops.transpose(ops.reshape(x, (B, T, self.heads, self.head_dim)), (0, 2, 1, 3))

    def __call__(self, x: Tensor, key_mask: np.ndarray) -> tuple[Tensor, Tensor]:
        B, T, _ = x.shape
        q, k, v = self._split(self.q(x)), self._split(self.k(x)), self._split(self.v(x))
        scores = ops.mul(ops.matmul(q, ops.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(self.head_dim))
        attn = ops.softmax(scores, axis=-1, mask=key_mask[:, None, None, :])
        ctx = ops.matmul(attn, v)
        ctx = ops.reshape(ops.transpose(ctx, (0, 2, 1, 3)), (B, T, self.width))
        return self.o(ctx), attn


class TransformerLayer(Module):
    def __init__(self, rng: np.random.Generator, width: int, heads: int, ff: int, dropout: float):
        super().__init__()
        self.dropout = dropout
        self.attn = self.add_child("attn", MultiHeadAttention(rng, width, heads))
        self.norm1 = self.add_child("norm1", LayerNorm(width))
        self.ff1 = self.add_child("ff1", Linear(rng, width, ff))
        self.ff2 = self.add_child("ff2", Linear(rng, ff, width))
        self.norm2 = self.add_child("norm2", LayerNorm(width))

    def __call__(self, x: Tensor, mask: np.ndarray, rng=None) -> tuple[Tensor, Tensor]:
        a, attn = self.attn(x, mask)
        a = ops.dropout(a, self.dropout, rng, training=self.training)
        x = self.norm1(ops.add(x, a))
        f = self.ff2(ops.relu(self.ff1(x)))
        f = ops.dropout(f, self.dropout, rng, training=self.training)
        return self.norm2(ops.add(x, f)), attn


class ContextualEncoder(Module):
    """Stack of self-attention layers.

    Returns the contextual token states and the per-layer attention tensors,
    each (B, heads, T, T) with rows over non-PAD keys summing to 1.
    """

    def __init__(self, rng: np.random.Generator, width: int = 64, layers: int = 2, heads: int = 4,
                 ff: int = 128, max_len: int = 64, dropout: float = 0.1):
        super().__init__()
        if width % heads:
            raise ValueError(f"width {width} not divisible by {heads} heads")
        self.width, self.n_layers, self.heads, self.max_len = width, layers, heads, max_len
        self.positions = self.add_param("positions", rng.normal(0.0, 0.1, size=(max_len, width)))
        self.layers = [self.add_child(f"layer{i}", TransformerLayer(rng, width, heads, ff, dropout))
                       for i in range(layers)]

    def __call__(self, x: Tensor, mask: np.ndarray, rng=None) -> tuple[Tensor, list[Tensor]]:
        B, T, D = x.shape
        if D != self.width:
            raise ShapeError(f"ContextualEncoder: input {x.shape} vs width {self.width}")
        if T > self.max_len:
            raise ShapeError(f"sequence length {T} exceeds max_len {self.max_len}")
        h = ops.add(x, self.positions[:T])
        attentions = []
        for layer in self.layers:
            h, attn = layer(h, mask, rng)
            attentions.append(attn)
        return h, attentions
