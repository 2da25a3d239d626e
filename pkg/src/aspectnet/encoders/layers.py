"""Small building blocks shared by the encoders."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from ..data import PAD_ID, UNK_ID, Vocabulary
from ..gradcore import Module, ShapeError, Tensor, ops

log = logging.getLogger(__name__)


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Linear(Module):
    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int, bias: bool = True):
        super().__init__()
        self.d_in, self.d_out = d_in, d_out
        self.weight = self.add_param("weight", glorot(rng, d_in, d_out))
        self.bias = self.add_param("bias", np.zeros(d_out)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.d_in:
            raise ShapeError(f"Linear: input {x.shape} vs weight {self.weight.shape}")
        y = ops.matmul(x, self.weight)
        return y if self.bias is None else ops.add(y, self.bias)


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.gamma = self.add_param("gamma", np.ones(dim))
        self.beta = self.add_param("beta", np.zeros(dim))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gamma, self.beta, self.eps)


class StaticEmbeddingTable(Module):
    """|V| x D word vectors. The PAD row starts at zero; PAD positions are masked downstream anyway."""

    def __init__(self, rng: np.random.Generator, vocab_size: int, dim: int, trainable: bool = True,
                 matrix: np.ndarray | None = None):
        super().__init__()
        if matrix is None:
            matrix = rng.normal(0.0, 0.3, size=(vocab_size, dim))
            matrix[PAD_ID] = 0.0
        elif matrix.shape != (vocab_size, dim):
            raise ShapeError(f"embedding matrix {matrix.shape} vs ({vocab_size}, {dim})")
        self.dim = dim
        self.table = self.add_param("table", np.array(matrix, dtype=np.float64))
        self.table.requires_grad = trainable

    @property
    def trainable(self) -> bool:
        return self.table.requires_grad

    def __call__(self, ids: np.ndarray) -> Tensor:
        return ops.embedding_lookup(self.table, ids)

    def grow(self, new_size: int, init_from: int = UNK_ID) -> None:
        """Append rows (copies of row ``init_from``) up to ``new_size``."""
        old = self.table.data
        if new_size <= old.shape[0]:
            return
        extra = np.repeat(old[init_from:init_from + 1], new_size - old.shape[0], axis=0)
        self.table.data = np.concatenate([old, extra], axis=0)


def load_word_vectors(path, vocab: Vocabulary, dim: int | None = None,
                      rng: np.random.Generator | None = None) -> tuple[np.ndarray, int, int]:
    """Read ``token v1 v2 ...`` lines into a matrix aligned with ``vocab``.

    Returns ``(matrix, n_loaded, n_skipped)``. Unparseable lines (wrong width,
    non-numeric values) are skipped and counted. Tokens absent from the file
    get small random rows; PAD stays zero.
    """
    rows: dict[str, np.ndarray] = {}
    skipped = 0
    with open(Path(path), encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                skipped += 1
                continue
            try:
                vec = np.array([float(v) for v in parts[1:]], dtype=np.float64)
            except ValueError:
                skipped += 1
                continue
            if dim is None:
                dim = vec.size
            if vec.size != dim:
                skipped += 1
                continue
            rows[parts[0]] = vec
    if dim is None:
        raise ValueError(f"no parseable vectors in {path}")
    if skipped:
        log.warning("skipped %d unparseable word-vector lines in %s", skipped, path)
    rng = rng or np.random.default_rng(0)
    matrix = rng.normal(0.0, 0.1, size=(len(vocab), dim))
    matrix[PAD_ID] = 0.0
    loaded = 0
    for tok, i in vocab.stoi.items():
        if tok in rows:
            matrix[i] = rows[tok]
            loaded += 1
    return matrix, loaded, skipped


class FusionParameters(Module):
    """Scalar blend weights for static and contextual embeddings."""

    def __init__(self, alpha: float = 1.0, beta: float = 1.0):
        super().__init__()
        self.alpha = self.add_param("alpha", np.array(alpha))
        self.beta = self.add_param("beta", np.array(beta))


def fuse_embeddings(static_seq, contextual_seq, alpha, beta) -> Tensor:
    """alpha * static + beta * contextual, elementwise; both sequences must share a shape."""
    static_seq, contextual_seq = ops.as_tensor(static_seq), ops.as_tensor(contextual_seq)
    if static_seq.shape != contextual_seq.shape:
        raise ShapeError(f"fuse_embeddings: static {static_seq.shape} vs contextual {contextual_seq.shape}")
    return ops.add(ops.mul(static_seq, alpha), ops.mul(contextual_seq, beta))


def masked_mean(x: Tensor, mask: np.ndarray, allow_empty: bool = False) -> Tensor:
    """Mean over axis 1 restricted to ``mask`` (B, T); all-masked rows are an error unless allowed."""
    counts = mask.sum(axis=1)
    if not allow_empty and np.any(counts == 0):
        raise ValueError("all-PAD input: nothing to pool")
    summed = ops.sum(ops.mul(x, mask[..., None].astype(np.float64)), axis=1)
    return ops.mul(summed, (1.0 / np.maximum(counts, 1.0))[:, None])
