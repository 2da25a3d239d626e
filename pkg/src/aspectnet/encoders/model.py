"""Component classifiers: embeddings -> encoder -> pooled vector -> 4 x 3 aspect logits."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..data import ASPECTS, PAD_ID, SENTIMENTS
from ..gradcore import Module, ShapeError, Tensor, no_grad, ops
from .layers import FusionParameters, Linear, StaticEmbeddingTable, fuse_embeddings, masked_mean
from .recurrent import RecurrentEncoder
from .transformer import ContextualEncoder

COMPONENTS = ("transformer", "bilstm", "lstm", "gru")
N_ASPECTS, N_CLASSES = len(ASPECTS), len(SENTIMENTS)


@dataclass
class ModelConfig:
    kind: str
    embed_dim: int = 32
    hidden: int = 32
    layers: int = 2
    heads: int = 4
    ff: int = 128
    max_len: int = 48
    dropout: float = 0.3
    recurrent_dropout: float = 0.2
    fusion_alpha: float = 1.0
    fusion_beta: float = 1.0

    def to_dict(self) -> dict:
        return asdict(self)


DESK_CONFIGS = {
    "transformer": ModelConfig("transformer", embed_dim=32, hidden=64, layers=2, heads=4, ff=128, dropout=0.1),
    "bilstm": ModelConfig("bilstm", embed_dim=32, hidden=16, layers=2),
    "lstm": ModelConfig("lstm", embed_dim=32, hidden=32, layers=2),
    "gru": ModelConfig("gru", embed_dim=32, hidden=24, layers=2),
}

REFERENCE_CONFIGS = {
    "transformer": ModelConfig("transformer", embed_dim=300, hidden=768, layers=12, heads=12, ff=3072,
                               max_len=128, dropout=0.1),
    "bilstm": ModelConfig("bilstm", embed_dim=300, hidden=128, layers=2, max_len=128),
    "lstm": ModelConfig("lstm", embed_dim=300, hidden=256, layers=2, max_len=128),
    "gru": ModelConfig("gru", embed_dim=300, hidden=200, layers=2, max_len=128),
}


def desk_config(kind: str, **overrides) -> ModelConfig:
    return replace(DESK_CONFIGS[kind], **overrides)


class ClassifierHead(Module):
    """Pooled vector -> logits shaped (B, 4 aspects, 3 sentiments)."""

    def __init__(self, rng: np.random.Generator, width: int):
        super().__init__()
        self.width = width
        self.proj = self.add_child("proj", Linear(rng, width, N_ASPECTS * N_CLASSES))

    def __call__(self, pooled: Tensor) -> Tensor:
        if pooled.shape[-1] != self.width:
            raise ShapeError(f"head expects width {self.width}, got {pooled.shape}")
        return ops.reshape(self.proj(pooled), (pooled.shape[0], N_ASPECTS, N_CLASSES))


@dataclass
class ModelPrediction:
    """Per-aspect logits and probabilities for a batch, shaped (N, 4, 3)."""

    logits: np.ndarray
    probs: np.ndarray
    attention: list[np.ndarray] | None = field(default=None, repr=False)

    @classmethod
    def from_logits(cls, logits: np.ndarray, attention=None) -> "ModelPrediction":
        return cls(np.asarray(logits), softmax_np(np.asarray(logits)), attention)

    @classmethod
    def from_probs(cls, probs: np.ndarray) -> "ModelPrediction":
        probs = np.asarray(probs, dtype=np.float64)
        return cls(np.log(np.clip(probs, 1e-300, None)), probs)

    def labels(self) -> np.ndarray:
        return self.probs.argmax(axis=-1)

    def __len__(self) -> int:
        return self.probs.shape[0]


def softmax_np(z: np.ndarray, axis: int = -1) -> np.ndarray:
    e = np.exp(z - z.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def predict(head: ClassifierHead, pooled) -> ModelPrediction:
    with no_grad():
        logits = head(ops.as_tensor(pooled)).data
    return ModelPrediction.from_logits(logits)


@dataclass
class ForwardOutput:
    logits: Tensor
    pooled: Tensor
    tokens: Tensor
    attention: list[Tensor] | None = None


class ComponentModel(Module):
    """One ensemble member. ``kind`` picks the encoder.

    The transformer member fuses its static input embeddings with its
    contextual outputs (``alpha * static + beta * contextual``) before pooling;
    when the static width differs from the model width a learned projection
    brings the static side to the model width first.
    """

    def __init__(self, config: ModelConfig, vocab_size: int, rng: np.random.Generator,
                 embedding_matrix: np.ndarray | None = None, trainable_embeddings: bool = True):
        super().__init__()
        if config.kind not in COMPONENTS:
            raise ValueError(f"unknown component kind {config.kind!r}")
        self.config = config
        self.kind = config.kind
        self.embedding = self.add_child("embedding", StaticEmbeddingTable(
            rng, vocab_size, config.embed_dim, trainable_embeddings, embedding_matrix))
        if config.kind == "transformer":
            self.projection = None
            if config.embed_dim != config.hidden:
                self.projection = self.add_child("projection", Linear(rng, config.embed_dim, config.hidden, bias=False))
            self.encoder = self.add_child("encoder", ContextualEncoder(
                rng, config.hidden, config.layers, config.heads, config.ff, config.max_len, config.dropout))
            self.fusion = self.add_child("fusion", FusionParameters(config.fusion_alpha, config.fusion_beta))
            width = config.hidden
        else:
            self.encoder = self.add_child("encoder", RecurrentEncoder(
                rng, config.kind, config.embed_dim, config.hidden, config.layers,
                config.dropout, config.recurrent_dropout))
            width = self.encoder.out_dim
        self.out_dim = width
        self.head = self.add_child("head", ClassifierHead(rng, width))

    @property
    def max_len(self) -> int:
        return self.config.max_len

    def forward(self, ids: np.ndarray, rng: np.random.Generator | None = None,
                allow_empty: bool = False) -> ForwardOutput:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.ndim == 1:
            ids = ids[None, :]
        return self.forward_embedded(self.embedding(ids), ids != PAD_ID, rng, allow_empty)

    def forward_embedded(self, emb: Tensor, mask: np.ndarray, rng: np.random.Generator | None = None,
                         allow_empty: bool = False) -> ForwardOutput:
        """Run from an embedded sequence (B, T, D); ``mask`` marks non-PAD positions."""
        emb = ops.as_tensor(emb)
        mask = np.asarray(mask, dtype=bool)
        if not allow_empty and np.any(mask.sum(axis=1) == 0):
            raise ValueError("all-PAD input: nothing to encode")
        attention = None
        if self.kind == "transformer":
            static = emb if self.projection is None else self.projection(emb)
            contextual, attention = self.encoder(static, mask, rng)
            tokens = fuse_embeddings(static, contextual, self.fusion.alpha, self.fusion.beta)
        else:
            tokens = self.encoder(ops.dropout(emb, self.config.dropout, rng, training=self.training), mask, rng)
        pooled = masked_mean(tokens, mask, allow_empty=allow_empty)
        dropped = ops.dropout(pooled, self.config.dropout, rng, training=self.training)
        return ForwardOutput(self.head(dropped), pooled, tokens, attention)

    def predict(self, ids: np.ndarray, batch_size: int = 512, with_attention: bool = False,
                allow_empty: bool = False) -> ModelPrediction:
        was_training = self.training
        self.eval()
        logits, attn = [], []
        try:
            with no_grad():
                for start in range(0, len(ids), batch_size):
                    out = self.forward(ids[start:start + batch_size], allow_empty=allow_empty)
                    logits.append(out.logits.data)
                    if with_attention and out.attention is not None:
                        attn.append(np.stack([a.data for a in out.attention], axis=1))
        finally:
            self.train(was_training)
        attention = np.concatenate(attn, axis=0) if attn else None
        return ModelPrediction.from_logits(np.concatenate(logits, axis=0), attention)

    def grow_vocabulary(self, new_size: int) -> None:
        self.embedding.grow(new_size)
