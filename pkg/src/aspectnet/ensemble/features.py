"""Per-review input features that condition the ensemble weights."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..data import EncodedSet, Review, tokenize

BUCKETS = ("short", "medium", "long")


def length_bucket(token_count: int) -> str:
    """short: < 10 tokens; medium: 10..20 inclusive; long: > 20."""
    if token_count < 0:
        raise ValueError("token_count must be >= 0")
    if token_count < 10:
        return "short"
    if token_count <= 20:
        return "medium"
    return "long"


@dataclass
class InputFeatures:
    """Arrays over N reviews."""

    token_count: np.ndarray
    oov_fraction: np.ndarray
    lexicon_strength: np.ndarray

    @property
    def bucket(self) -> np.ndarray:
        return np.array([BUCKETS.index(length_bucket(int(n))) for n in self.token_count], dtype=np.int64)

    def matrix(self) -> np.ndarray:
        """Scaled (N, 3) design matrix for the gating network."""
        return np.stack([self.token_count / 20.0, self.oov_fraction, self.lexicon_strength], axis=1).astype(np.float64)

    def __len__(self) -> int:
        return len(self.token_count)


def compute_features(data: EncodedSet, lexicon: dict[str, float]) -> InputFeatures:
    counts = data.token_counts.astype(np.float64)
    denom = np.maximum(counts, 1.0)
    strength = np.array([sum(lexicon.get(t, 0.0) for t in toks) for toks in data.tokens]) / denom
    return InputFeatures(counts, data.oov_counts / denom, strength)


def build_lexicon(reviews: Sequence[Review], min_count: int = 3, threshold: float = 1.0,
                  tokenizer=tokenize) -> dict[str, float]:
    """Signed sentiment lexicon mined from labelled reviews.

    A token gets +1 (-1) when its smoothed log-odds of appearing in reviews
    with a Positive (Negative) annotation exceeds ``threshold``.
    """
    pos, neg = Counter(), Counter()
    for r in reviews:
        toks = set(tokenizer(r.text))
        sentiments = {s for _, s in r.annotations}
        if "Positive" in sentiments:
            pos.update(toks)
        if "Negative" in sentiments:
            neg.update(toks)
    n_pos, n_neg = sum(pos.values()) + 1, sum(neg.values()) + 1
    lex = {}
    for tok in sorted(set(pos) | set(neg)):
        if pos[tok] + neg[tok] < min_count:
            continue
        score = math.log((pos[tok] + 0.5) / n_pos) - math.log((neg[tok] + 0.5) / n_neg)
        if score > threshold:
            lex[tok] = 1.0
        elif score < -threshold:
            lex[tok] = -1.0
    return lex
