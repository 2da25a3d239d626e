"""Component encoders, embedding fusion, classifier heads and phase-one training."""

from .layers import FusionParameters, StaticEmbeddingTable, fuse_embeddings, load_word_vectors, masked_mean
from .model import (
    COMPONENTS,
    DESK_CONFIGS,
    REFERENCE_CONFIGS,
    ClassifierHead,
    ComponentModel,
    ModelConfig,
    ModelPrediction,
    desk_config,
    predict,
    softmax_np,
)
from .optim import Adam, AdamW, clip_grad_norm, exponential_schedule, global_norm, linear_schedule
from .recurrent import RecurrentEncoder
from .training import (
    DESK_TRAIN,
    REFERENCE_TRAIN,
    TrainConfig,
    TrainingDiverged,
    TrainResult,
    desk_train_config,
    train_individual,
)
from .transformer import ContextualEncoder

__all__ = [
    "COMPONENTS", "DESK_CONFIGS", "DESK_TRAIN", "REFERENCE_CONFIGS", "REFERENCE_TRAIN", "Adam", "AdamW",
    "ClassifierHead", "ComponentModel", "ContextualEncoder", "FusionParameters", "ModelConfig",
    "ModelPrediction", "RecurrentEncoder", "StaticEmbeddingTable", "TrainConfig", "TrainResult",
    "TrainingDiverged", "clip_grad_norm", "desk_config", "desk_train_config", "exponential_schedule",
    "fuse_embeddings", "global_norm", "linear_schedule", "load_word_vectors", "masked_mean", "predict",
    "softmax_np", "train_individual",
]
