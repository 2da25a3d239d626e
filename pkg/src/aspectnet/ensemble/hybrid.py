"""The trained ensemble: four component models, weights, temperature and threshold."""

from __future__ import annotations

import configparser
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..data import EncodedSet, Vocabulary
from ..encoders.model import ComponentModel, ModelPrediction
from ..metrics import Metrics, evaluate
from .calibration import CalibrationState
from .decision import DEFAULT_THRESHOLD
from .features import InputFeatures, compute_features
from .weights import EnsembleWeights, check_simplex, combine


@dataclass
class HybridEnsemble:
    components: dict[str, ComponentModel]
    weights: EnsembleWeights
    vocab: Vocabulary
    lexicon: dict[str, float] = field(default_factory=dict)
    calibration: CalibrationState = field(default_factory=CalibrationState)
    threshold: float = DEFAULT_THRESHOLD
    lambda_diversity: float = 0.1
    space: str = "prob"

    @property
    def max_len(self) -> int:
        return next(iter(self.components.values())).max_len

    @property
    def order(self) -> tuple[str, ...]:
        return self.weights.components

    def features(self, data: EncodedSet) -> InputFeatures:
        return compute_features(data, self.lexicon)

    def component_predictions(self, data: EncodedSet, jobs: int = 1,
                              with_attention: bool = False) -> dict[str, ModelPrediction]:
        """Per-component predictions; ``jobs > 1`` runs the members on worker threads."""
        def run(kind):
            return kind, self.components[kind].predict(data.ids, with_attention=with_attention and kind == "transformer")
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                return dict(pool.map(run, self.order))
        return dict(map(run, self.order))

    def combine_cached(self, preds: dict[str, ModelPrediction], features: InputFeatures,
                       exclude: Iterable[str] = (), calibrated: bool = True) -> ModelPrediction:
        keep, w = renormalized(self.weights, features, len(features), exclude)
        out = combine([preds[k] for k in keep], w, space=self.space)
        if calibrated and self.calibration.temperature != 1.0:
            out = ModelPrediction.from_logits(self.calibration.apply(out.logits))
        return out

    def predict(self, data: EncodedSet, exclude: Iterable[str] = (), calibrated: bool = True,
                jobs: int = 1) -> ModelPrediction:
        return self.combine_cached(self.component_predictions(data, jobs), self.features(data), exclude, calibrated)

    def config_section(self) -> str:
        """Plain-text key-value summary of the ensemble settings."""
        cp = configparser.ConfigParser()
        cp["ensemble"] = {"mode": self.weights.mode, "lambda_diversity": repr(self.lambda_diversity),
                          "threshold": repr(self.threshold), "temperature": repr(self.calibration.temperature),
                          "space": self.space, "components": ",".join(self.order)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def renormalized(weights: EnsembleWeights, features: InputFeatures | None, n: int,
                 exclude: Iterable[str] = ()) -> tuple[list[str], np.ndarray]:
    """Kept component names and their coefficients rescaled onto the simplex."""
    exclude = set(exclude)
    unknown = exclude - set(weights.components)
    if unknown:
        raise ValueError(f"unknown components {sorted(unknown)}")
    keep = [k for k in weights.components if k not in exclude]
    if not keep:
        raise ValueError("cannot exclude every component")
    idx = [weights.components.index(k) for k in keep]
    w = weights.coefficients(features, n) if weights.mode != "static" else weights.coefficients()
    w = w[..., idx]
    total = w.sum(axis=-1, keepdims=True)
    # a kept subset carrying no weight falls back to a uniform split
    w = np.where(total > 0, w / np.where(total > 0, total, 1.0), 1.0 / len(keep))
    check_simplex(w)
    return keep, w


ABLATION_CONFIGS = (
    ("Full ensemble", ()),
    ("Without transformer", ("transformer",)),
    ("Without BiLSTM", ("bilstm",)),
    ("Without LSTM", ("lstm",)),
    ("Without GRU", ("gru",)),
)


@dataclass
class AblationRow:
    configuration: str
    excluded: tuple[str, ...]
    metrics: Metrics

    def to_dict(self) -> dict:
        m = self.metrics
        return {"configuration": self.configuration, "excluded": list(self.excluded),
                "accuracy": m.accuracy, "precision": m.macro_precision, "recall": m.macro_recall,
                "f1": m.macro_f1}


def ablate(ensemble: HybridEnsemble, data: EncodedSet,
           configurations: Sequence[tuple[str, Sequence[str]]] = ABLATION_CONFIGS,
           preds: dict[str, ModelPrediction] | None = None) -> list[AblationRow]:
    """Metrics for each exclusion set, with the remaining weights renormalized."""
    preds = preds or ensemble.component_predictions(data)
    feats = ensemble.features(data)
    rows = []
    for name, excluded in configurations:
        p = ensemble.combine_cached(preds, feats, excluded)
        rows.append(AblationRow(name, tuple(excluded), evaluate(p.labels(), data.labels, data.mask)))
    return rows


def ablation_csv(rows: Sequence[AblationRow]) -> str:
    lines = ["configuration,accuracy,precision,recall,f1"]
    for r in rows:
        d = r.to_dict()
        lines.append(f"{r.configuration},{d['accuracy']:.4f},{d['precision']:.4f},{d['recall']:.4f},{d['f1']:.4f}")
    return "\n".join(lines) + "\n"
