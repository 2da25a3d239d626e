"""Single-temperature calibration fitted on held-out data."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize_scalar

T_BOUNDS = (0.05, 20.0)


@dataclass
class CalibrationState:
    temperature: float = 1.0
    nll_before: float | None = None
    nll_after: float | None = None

    def apply(self, logits: np.ndarray) -> np.ndarray:
        return scale_logits(logits, self.temperature)

    def to_dict(self) -> dict:
        return asdict(self)


def scale_logits(logits: np.ndarray, temperature: float) -> np.ndarray:
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    return np.asarray(logits, dtype=np.float64) / temperature


def nll(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray, temperature: float = 1.0) -> float:
    """Mean negative log-likelihood over annotated cells."""
    z = scale_logits(logits, temperature)
    z = z - z.max(axis=-1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    picked = np.take_along_axis(logp, labels[..., None], axis=-1)[..., 0]
    m = mask.astype(np.float64)
    if m.sum() == 0:
        raise ValueError("no annotated cells")
    return float(-(picked * m).sum() / m.sum())


def fit_temperature(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray,
                    bounds: tuple[float, float] = T_BOUNDS) -> CalibrationState:
    """Minimize held-out NLL over one scalar temperature.

    Falls back to T = 1 when the search does not improve on it, so the
    fitted state never increases NLL on the set it was fitted on.
    """
    base = nll(logits, labels, mask)
    # search in log-temperature: the NLL is much better conditioned there
    res = minimize_scalar(lambda s: nll(logits, labels, mask, float(np.exp(s))),
                          bounds=(np.log(bounds[0]), np.log(bounds[1])), method="bounded",
                          options={"xatol": 1e-6})
    t = float(np.exp(res.x))
    after = nll(logits, labels, mask, t)
    if not after < base:
        return CalibrationState(1.0, base, base)
    return CalibrationState(t, base, after)
