"""Two-phase training: members individually, then weights and temperature on validation."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..data import Review, Vocabulary, build_vocab, encode_reviews, tokenize
from ..encoders.model import COMPONENTS, ComponentModel, ModelConfig, ModelPrediction, desk_config
from ..encoders.training import TrainConfig, TrainResult, desk_train_config, train_individual
from ..gradcore import checkpoint
from ..rng import derive_rng
from .calibration import CalibrationState, fit_temperature
from .features import build_lexicon
from .hybrid import HybridEnsemble
from .weights import EnsembleWeights, learn_weights

log = logging.getLogger(__name__)


@dataclass
class EnsembleSettings:
    mode: str = "bucketed"
    lambda_diversity: float = 0.1
    threshold: float = 0.5
    space: str = "prob"
    weight_steps: int = 300
    weight_lr: float = 0.05
    shrinkage: float = 0.01
    calibrate: bool = True


@dataclass
class TrainingReport:
    members: dict[str, dict] = field(default_factory=dict)
    weight_trace: list[float] = field(default_factory=list)
    calibration: dict = field(default_factory=dict)
    seconds: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"members": self.members, "weight_trace": self.weight_trace,
                "calibration": self.calibration, "seconds": self.seconds}


def learn_ensemble_weights(ensemble: HybridEnsemble, validation, settings: EnsembleSettings, seed: int,
                           preds: dict[str, ModelPrediction] | None = None) -> HybridEnsemble:
    preds = preds or ensemble.component_predictions(validation)
    order = ensemble.order
    ensemble.weights = learn_weights([preds[k] for k in order], validation.labels, validation.mask,
                                     settings.lambda_diversity, settings.mode, ensemble.features(validation),
                                     settings.weight_steps, settings.weight_lr, seed, order,
                                     shrinkage=settings.shrinkage)
    ensemble.lambda_diversity, ensemble.threshold, ensemble.space = (settings.lambda_diversity, settings.threshold,
                                                                     settings.space)
    return ensemble


def calibrate_ensemble(ensemble: HybridEnsemble, validation,
                       preds: dict[str, ModelPrediction] | None = None) -> HybridEnsemble:
    preds = preds or ensemble.component_predictions(validation)
    raw = ensemble.combine_cached(preds, ensemble.features(validation), calibrated=False)
    ensemble.calibration = fit_temperature(raw.logits, validation.labels, validation.mask)
    return ensemble


def fit_ensemble_head(ensemble: HybridEnsemble, validation, settings: EnsembleSettings, seed: int,
                      preds: dict[str, ModelPrediction] | None = None) -> HybridEnsemble:
    """Learn weights, then temperature, on the encoded validation set (in place)."""
    preds = preds or ensemble.component_predictions(validation)
    learn_ensemble_weights(ensemble, validation, settings, seed, preds)
    ensemble.calibration = CalibrationState()
    if settings.calibrate:
        calibrate_ensemble(ensemble, validation, preds)
    return ensemble


def train_members(train: Sequence[Review], validation: Sequence[Review], seed: int = 0,
                  configs: dict[str, ModelConfig] | None = None,
                  train_configs: dict[str, TrainConfig] | None = None,
                  vocab: Vocabulary | None = None,
                  components: Sequence[str] = COMPONENTS) -> tuple[HybridEnsemble, TrainingReport]:
    """Phase one: each member trained alone. Weights start uniform, temperature at 1."""
    configs = {k: (configs or {}).get(k) or desk_config(k) for k in components}
    train_configs = {k: (train_configs or {}).get(k) or desk_train_config(k) for k in components}
    lens = {c.max_len for c in configs.values()}
    if len(lens) != 1:
        raise ValueError("all members must share max_len")
    max_len = lens.pop()
    vocab = vocab or build_vocab(tokenize(r.text) for r in train)
    tr = encode_reviews(train, vocab, max_len)
    va = encode_reviews(validation, vocab, max_len)
    report = TrainingReport()
    members = {}
    for kind in components:
        t0 = time.perf_counter()
        model = ComponentModel(configs[kind], len(vocab), derive_rng(seed, "init", kind))
        res: TrainResult = train_individual(model, tr, va, train_configs[kind], derive_rng(seed, "train", kind))
        members[kind] = model
        report.members[kind] = res.to_dict()
        report.seconds[kind] = time.perf_counter() - t0
        log.info("trained %s: best epoch %d, val macro-F1 %.4f", kind, res.best_epoch, res.best_val_macro_f1)
    ensemble = HybridEnsemble(members, EnsembleWeights.uniform("static", tuple(components)), vocab,
                              build_lexicon(train))
    return ensemble, report


def train_ensemble(train: Sequence[Review], validation: Sequence[Review], seed: int = 0,
                   configs: dict[str, ModelConfig] | None = None,
                   train_configs: dict[str, TrainConfig] | None = None,
                   settings: EnsembleSettings | None = None,
                   vocab: Vocabulary | None = None,
                   components: Sequence[str] = COMPONENTS) -> tuple[HybridEnsemble, TrainingReport]:
    """Both phases: members, then weights and temperature on ``validation``."""
    settings = settings or EnsembleSettings()
    ensemble, report = train_members(train, validation, seed, configs, train_configs, vocab, components)
    va = encode_reviews(validation, ensemble.vocab, ensemble.max_len)
    t0 = time.perf_counter()
    fit_ensemble_head(ensemble, va, settings, seed)
    report.seconds["ensemble"] = time.perf_counter() - t0
    report.weight_trace = ensemble.weights.trace
    report.calibration = ensemble.calibration.to_dict()
    return ensemble, report


# -- persistence -----------------------------------------------------------------


MEMBERS_FILE, WEIGHTS_FILE, CALIBRATION_FILE = "members.json", "weights.json", "calibration.json"


def _write_json(path: Path, obj) -> str:
    text = json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=1) + "\n"
    path.write_text(text, encoding="utf-8")
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def save_members(ensemble: HybridEnsemble, directory) -> dict[str, str]:
    """Member checkpoints plus vocabulary, lexicon and configs; returns sha256 per file."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    digests = {}
    for kind, model in ensemble.components.items():
        digests[f"{kind}.ckpt"] = checkpoint.save(d / f"{kind}.ckpt", model.state_dict())
    meta = {"order": list(ensemble.components), "vocab": ensemble.vocab.to_dict(), "lexicon": ensemble.lexicon,
            "configs": {k: m.config.to_dict() for k, m in ensemble.components.items()}}
    digests[MEMBERS_FILE] = _write_json(d / MEMBERS_FILE, meta)
    return digests


def save_weights(ensemble: HybridEnsemble, directory) -> dict[str, str]:
    meta = {"weights": ensemble.weights.to_dict(), "threshold": ensemble.threshold,
            "lambda_diversity": ensemble.lambda_diversity, "space": ensemble.space}
    return {WEIGHTS_FILE: _write_json(Path(directory) / WEIGHTS_FILE, meta)}


def save_calibration(ensemble: HybridEnsemble, directory) -> dict[str, str]:
    return {CALIBRATION_FILE: _write_json(Path(directory) / CALIBRATION_FILE, ensemble.calibration.to_dict())}


def save_ensemble(ensemble: HybridEnsemble, directory) -> dict[str, str]:
    return save_members(ensemble, directory) | save_weights(ensemble, directory) | save_calibration(ensemble, directory)


def load_ensemble(directory) -> HybridEnsemble:
    """Load members; weights and calibration fall back to uniform / T = 1 when not yet fitted."""
    d = Path(directory)
    meta = json.loads((d / MEMBERS_FILE).read_text(encoding="utf-8"))
    members = {}
    for kind in meta["order"]:
        state = checkpoint.load(d / f"{kind}.ckpt")
        model = ComponentModel(ModelConfig(**meta["configs"][kind]), state["embedding.table"].shape[0],
                               np.random.default_rng(0))
        model.load_state_dict(state)
        model.eval()
        members[kind] = model
    ensemble = HybridEnsemble(members, EnsembleWeights.uniform("static", tuple(meta["order"])),
                              Vocabulary.from_dict(meta["vocab"]), meta["lexicon"])
    if (d / WEIGHTS_FILE).exists():
        w = json.loads((d / WEIGHTS_FILE).read_text(encoding="utf-8"))
        ensemble.weights = EnsembleWeights.from_dict(w["weights"])
        ensemble.threshold, ensemble.lambda_diversity, ensemble.space = w["threshold"], w["lambda_diversity"], w["space"]
    if (d / CALIBRATION_FILE).exists():
        ensemble.calibration = CalibrationState(**json.loads((d / CALIBRATION_FILE).read_text(encoding="utf-8")))
    return ensemble
