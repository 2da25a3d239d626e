"""Turning ensemble probabilities into per-aspect decisions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import ASPECTS, SENTIMENTS

DEFAULT_THRESHOLD = 0.5
THRESHOLD_GRID = (0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7)


@dataclass(frozen=True)
class AspectDecision:
    aspect: str
    addressed: bool
    sentiment: str
    confidence: float


def decide(probs: np.ndarray, threshold: float = DEFAULT_THRESHOLD) -> list[AspectDecision]:
    """Decisions for one review's (A, C) probability matrix.

    An aspect counts as addressed when its top probability reaches the
    threshold. Exact ties resolve Positive > Negative > Neutral, which is
    the class index order, so ``argmax`` (first maximum) implements it.
    """
    probs = np.asarray(probs)
    if probs.shape != (len(ASPECTS), len(SENTIMENTS)):
        raise ValueError(f"expected ({len(ASPECTS)}, {len(SENTIMENTS)}) probabilities, got {probs.shape}")
    out = []
    for a, row in zip(ASPECTS, probs):
        k = int(np.argmax(row))
        out.append(AspectDecision(a, bool(row[k] >= threshold), SENTIMENTS[k], float(row[k])))
    return out


def decide_batch(probs: np.ndarray, threshold: float = DEFAULT_THRESHOLD) -> list[list[AspectDecision]]:
    return [decide(p, threshold) for p in probs]


def addressed_f1(probs: np.ndarray, mask: np.ndarray, threshold: float) -> float:
    """F1 of the addressed/not-addressed call against the annotation mask."""
    pred = probs.max(axis=-1) >= threshold
    gold = mask.astype(bool)
    tp = float((pred & gold).sum())
    denom = float(pred.sum() + gold.sum())
    return 0.0 if denom == 0 else 2 * tp / denom


def search_threshold(probs: np.ndarray, mask: np.ndarray, grid=THRESHOLD_GRID) -> tuple[float, dict[float, float]]:
    """Pick the grid threshold with the best addressed-F1; ties go to the smaller threshold."""
    scores = {float(t): addressed_f1(probs, mask, t) for t in grid}
    best = max(scores, key=lambda t: (scores[t], -t))
    return best, scores
