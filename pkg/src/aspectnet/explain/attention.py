"""Token scores from the contextual encoder's attention maps."""

from __future__ import annotations

import numpy as np


class AttributionUnavailable(TypeError):
    pass


def attention_attribution(attention, mask: np.ndarray, layer: int = -1) -> np.ndarray:
    """Scores over the non-PAD tokens of one instance.

    ``attention`` is ``(layers, heads, T, T)`` (or a list of per-layer
    ``(heads, T, T)``). The chosen layer is averaged over heads, the query
    rows of real tokens are averaged (the pooled query), and the result is
    renormalized over real tokens.
    """
    if attention is None:
        raise AttributionUnavailable("attention attribution needs a transformer member")
    att = np.asarray(attention if not isinstance(attention, list) else np.stack(attention), dtype=np.float64)
    if att.ndim != 4:
        raise ValueError(f"expected (layers, heads, T, T), got {att.shape}")
    mask = np.asarray(mask, dtype=bool)
    real = np.flatnonzero(mask)
    if real.size == 0:
        raise ValueError("no real tokens")
    a = att[layer].mean(axis=0)  # (T, T)
    pooled = a[real].mean(axis=0)[real]
    total = pooled.sum()
    if total <= 0:
        return np.full(real.size, 1.0 / real.size)
    return pooled / total
