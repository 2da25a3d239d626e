"""Weighted ensembling of the four component models."""

from .calibration import CalibrationState, fit_temperature, nll, scale_logits
from .decision import (
    DEFAULT_THRESHOLD,
    THRESHOLD_GRID,
    AspectDecision,
    addressed_f1,
    decide,
    decide_batch,
    search_threshold,
)
from .features import BUCKETS, InputFeatures, build_lexicon, compute_features, length_bucket
from .hybrid import ABLATION_CONFIGS, AblationRow, HybridEnsemble, ablate, ablation_csv, renormalized
from .pipeline import (
    EnsembleSettings,
    TrainingReport,
    calibrate_ensemble,
    fit_ensemble_head,
    learn_ensemble_weights,
    load_ensemble,
    save_calibration,
    save_ensemble,
    save_members,
    save_weights,
    train_ensemble,
    train_members,
)
from .weights import (
    MODES,
    PUBLISHED_BUCKET_WEIGHTS,
    EnsembleWeights,
    SimplexError,
    check_simplex,
    combine,
    correlation_matrix,
    ensemble_objective,
    learn_weights,
)

__all__ = [
    "ABLATION_CONFIGS", "AblationRow", "AspectDecision", "BUCKETS", "CalibrationState", "DEFAULT_THRESHOLD",
    "EnsembleSettings", "EnsembleWeights", "HybridEnsemble", "InputFeatures", "MODES", "SimplexError",
    "PUBLISHED_BUCKET_WEIGHTS", "THRESHOLD_GRID", "TrainingReport", "ablate", "ablation_csv", "addressed_f1",
    "build_lexicon", "calibrate_ensemble", "learn_ensemble_weights", "train_members", "check_simplex", "combine", "compute_features", "correlation_matrix", "decide",
    "decide_batch", "ensemble_objective", "fit_ensemble_head", "fit_temperature", "learn_weights",
    "length_bucket", "load_ensemble", "nll", "renormalized", "save_calibration", "save_ensemble", "save_members", "save_weights", "scale_logits",
    "search_threshold", "train_ensemble",
]
