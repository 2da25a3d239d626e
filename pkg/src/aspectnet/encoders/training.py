"""Phase-one training of a single component model."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..data import EncodedSet
from ..gradcore import ops
from ..metrics import evaluate
from .model import ComponentModel
from .optim import Adam, clip_grad_norm, exponential_schedule, linear_schedule

log = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    optimizer: str = "adam"  # "adam" | "adamw"
    lr: float = 1e-3
    weight_decay: float = 0.0
    schedule: str = "exponential"  # "exponential" | "linear" | "constant"
    decay_rate: float = 0.95
    warmup_fraction: float = 0.1
    epochs: int = 12
    batch_size: int = 32
    patience: int = 3
    clip_norm: float = 1.0
    lr_multipliers: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


# Learning rates are desk-scale values for models trained from scratch; the
# published 2e-5 / 1e-3 pair assumes a pretrained transformer.
DESK_TRAIN = {
    "transformer": TrainConfig(optimizer="adamw", lr=2e-3, weight_decay=0.01, schedule="linear"),
    "bilstm": TrainConfig(optimizer="adam", lr=1e-2, schedule="exponential"),
    "lstm": TrainConfig(optimizer="adam", lr=1e-2, schedule="exponential"),
    "gru": TrainConfig(optimizer="adam", lr=1e-2, schedule="exponential"),
}

REFERENCE_TRAIN = {
    "transformer": TrainConfig(optimizer="adamw", lr=2e-5, weight_decay=0.01, schedule="linear"),
    "bilstm": TrainConfig(optimizer="adam", lr=1e-3, schedule="exponential"),
    "lstm": TrainConfig(optimizer="adam", lr=1e-3, schedule="exponential"),
    "gru": TrainConfig(optimizer="adam", lr=1e-3, schedule="exponential"),
}


def desk_train_config(kind: str, **overrides) -> TrainConfig:
    return replace(DESK_TRAIN[kind], **overrides)


@dataclass
class TrainResult:
    history: list[dict]
    best_epoch: int
    best_val_macro_f1: float
    stopped_early: bool

    def to_dict(self) -> dict:
        return asdict(self)


def make_optimizer(model: ComponentModel, config: TrainConfig) -> Adam:
    decoupled = config.optimizer == "adamw"
    if config.optimizer not in ("adam", "adamw"):
        raise ValueError(f"unknown optimizer {config.optimizer!r}")
    return Adam(model.named_parameters(), lr=config.lr, weight_decay=config.weight_decay,
                decoupled=decoupled, lr_multipliers=config.lr_multipliers)


def batch_loss(model: ComponentModel, data: EncodedSet, rng: np.random.Generator | None = None):
    out = model.forward(data.ids, rng=rng)
    return ops.cross_entropy(out.logits, data.labels, data.mask)


def validation_scores(model: ComponentModel, data: EncodedSet) -> tuple[float, float]:
    pred = model.predict(data.ids)
    picked = np.take_along_axis(pred.probs, data.labels[..., None], axis=-1)[..., 0]
    nll = float(-(np.log(np.clip(picked, 1e-300, None)) * data.mask).sum() / data.mask.sum())
    return nll, evaluate(pred.labels(), data.labels, data.mask).macro_f1


def train_individual(model: ComponentModel, train: EncodedSet, validation: EncodedSet,
                     config: TrainConfig, rng: np.random.Generator) -> TrainResult:
    """Mini-batch training with clipping, a per-kind schedule and early stopping.

    Early stopping watches validation macro-F1; the best epoch's parameters
    are restored before returning. A non-finite loss aborts immediately.
    """
    if len(train) == 0 or len(validation) == 0:
        raise ValueError("train and validation sets must be nonempty")
    opt = make_optimizer(model, config)
    steps_per_epoch = -(-len(train) // config.batch_size)
    total_steps = steps_per_epoch * config.epochs
    warmup = int(round(config.warmup_fraction * total_steps))
    history: list[dict] = []
    best_f1, best_epoch, best_state = -1.0, -1, model.state_dict()
    bad_epochs, step, stopped = 0, 0, False
    for epoch in range(config.epochs):
        model.train()
        order = rng.permutation(len(train))
        losses = []
        for start in range(0, len(train), config.batch_size):
            batch = train.subset(order[start:start + config.batch_size])
            if batch.mask.sum() == 0:
                continue
            if config.schedule == "linear":
                opt.lr = config.lr * linear_schedule(step, total_steps, warmup)
            elif config.schedule == "exponential":
                opt.lr = config.lr * exponential_schedule(epoch, config.decay_rate)
            else:
                opt.lr = config.lr
            opt.zero_grad()
            loss = batch_loss(model, batch, rng)
            if not np.isfinite(loss.item()):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, step {step}")
            loss.backward()
            clip_grad_norm(opt.params, config.clip_norm)
            opt.step()
            losses.append(loss.item())
            step += 1
        val_loss, val_f1 = validation_scores(model, validation)
        history.append({"epoch": epoch, "train_loss": float(np.mean(losses)), "val_loss": val_loss,
                        "val_macro_f1": val_f1, "lr": opt.lr})
        log.debug("%s epoch %d loss %.4f val_f1 %.4f", model.kind, epoch, history[-1]["train_loss"], val_f1)
        if val_f1 > best_f1:
            best_f1, best_epoch, best_state, bad_epochs = val_f1, epoch, model.state_dict(), 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                stopped = True
                break
    model.load_state_dict(best_state)
    model.eval()
    return TrainResult(history, best_epoch, best_f1, stopped)
