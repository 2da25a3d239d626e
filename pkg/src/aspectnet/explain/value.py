"""Coalition value functions backed by a component model or the full ensemble."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import ASPECTS, PAD_ID, SENTIMENTS, UNK_ID
from ..encoders.model import ComponentModel, ModelPrediction
from ..ensemble.weights import combine
from .shapley import ValueFunction


@dataclass(frozen=True)
class MaskingPolicy:
    """Which id replaces a token that is left out of a coalition."""

    token: str = "PAD"

    def __post_init__(self):
        if self.token not in ("PAD", "UNK"):
            raise ValueError(f"masking token must be PAD or UNK, got {self.token!r}")

    @property
    def token_id(self) -> int:
        return PAD_ID if self.token == "PAD" else UNK_ID


def token_positions(ids: np.ndarray) -> np.ndarray:
    return np.flatnonzero(np.asarray(ids) != PAD_ID)


def masked_ids(ids: np.ndarray, masks: np.ndarray, policy: MaskingPolicy) -> np.ndarray:
    """(M, T) copies of ``ids`` with the dropped tokens substituted; length never changes."""
    ids = np.asarray(ids, dtype=np.int64)
    pos = token_positions(ids)
    masks = np.asarray(masks, dtype=bool)
    if masks.shape[1] != pos.size:
        raise ValueError(f"mask width {masks.shape[1]} != {pos.size} tokens")
    out = np.repeat(ids[None, :], len(masks), axis=0)
    sub = out[:, pos]
    sub[~masks] = policy.token_id
    out[:, pos] = sub
    return out


def _index(aspect: str | int, cls: str | int) -> tuple[int, int]:
    a = ASPECTS.index(aspect) if isinstance(aspect, str) else int(aspect)
    c = SENTIMENTS.index(cls) if isinstance(cls, str) else int(cls)
    return a, c


def model_value_function(model: ComponentModel, ids: np.ndarray, aspect, cls,
                         policy: MaskingPolicy = MaskingPolicy(), batch_size: int = 256) -> ValueFunction:
    """Probability of (aspect, class) as a function of the kept tokens."""
    a, c = _index(aspect, cls)

    def fn(masks: np.ndarray) -> np.ndarray:
        batch = masked_ids(ids, masks, policy)
        return model.predict(batch, batch_size=batch_size, allow_empty=True).probs[:, a, c]
    return fn


def ensemble_value_function(ensemble, ids: np.ndarray, coefficients: np.ndarray, aspect, cls,
                            policy: MaskingPolicy = MaskingPolicy(), members=None,
                            batch_size: int = 256) -> ValueFunction:
    """Calibrated ensemble probability with the weights held at the instance's own coefficients.

    Keeping the coefficients fixed makes the value depend on the kept tokens
    only through the member outputs.
    """
    a, c = _index(aspect, cls)
    members = list(members or ensemble.order)
    w = np.asarray(coefficients, dtype=np.float64)

    def fn(masks: np.ndarray) -> np.ndarray:
        batch = masked_ids(ids, masks, policy)
        preds = [ensemble.components[k].predict(batch, batch_size=batch_size, allow_empty=True) for k in members]
        out = combine(preds, w, space=ensemble.space)
        if ensemble.calibration.temperature != 1.0:
            out = ModelPrediction.from_logits(ensemble.calibration.apply(out.logits))
        return out.probs[:, a, c]
    return fn
