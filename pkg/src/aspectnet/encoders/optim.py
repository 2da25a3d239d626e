"""Adam / AdamW, global-norm clipping and learning-rate schedules."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..gradcore import Tensor


def global_norm(params: Sequence[Tensor]) -> float:
    return float(np.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params if p.grad is not None)))


def clip_grad_norm(params: Sequence[Tensor], max_norm: float = 1.0) -> float:
    """Rescale gradients in place so their global L2 norm is at most ``max_norm``.

    Returns the norm measured before clipping.
    """
    norm = global_norm(params)
    if norm > max_norm:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale
    return norm


class Adam:
    """Adam with optional weight decay.

    ``decoupled=True`` gives AdamW: the decay is applied to the weights
    directly (``p -= lr * wd * p``) rather than folded into the gradient.
    Per-parameter learning-rate multipliers are matched by name prefix.
    """

    def __init__(self, named_params, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0, decoupled: bool = False,
                 lr_multipliers: dict[str, float] | None = None):
        self.named = [(n, p) for n, p in named_params if p.requires_grad]
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.decoupled = decoupled
        self.t = 0
        self.m = [np.zeros_like(p.data) for _, p in self.named]
        self.v = [np.zeros_like(p.data) for _, p in self.named]
        mults = lr_multipliers or {}
        self.mult = []
        for name, _ in self.named:
            hits = [k for k in mults if name.startswith(k)]
            self.mult.append(mults[max(hits, key=len)] if hits else 1.0)

    @property
    def params(self) -> list[Tensor]:
        return [p for _, p in self.named]

    def zero_grad(self) -> None:
        for _, p in self.named:
            p.grad = None

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, (_, p) in enumerate(self.named):
            if p.grad is None:
                continue
            if self.m[k].shape != p.data.shape:
                # the parameter grew (vocabulary extension); keep moments for the old rows
                self.m[k] = _resize(self.m[k], p.data.shape)
                self.v[k] = _resize(self.v[k], p.data.shape)
            g = p.grad
            lr = self.lr * self.mult[k]
            if self.weight_decay and not self.decoupled:
                g = g + self.weight_decay * p.data
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            update = (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)
            if self.weight_decay and self.decoupled:
                p.data = np.asarray(p.data - lr * self.weight_decay * p.data)
            p.data = np.asarray(p.data - lr * update)


def AdamW(named_params, lr: float = 1e-3, weight_decay: float = 0.01, **kw) -> Adam:
    return Adam(named_params, lr=lr, weight_decay=weight_decay, decoupled=True, **kw)


def _resize(arr: np.ndarray, shape) -> np.ndarray:
    out = np.zeros(shape)
    out[: arr.shape[0]] = arr
    return out


def linear_schedule(step: int, total_steps: int, warmup_steps: int) -> float:
    """Multiplier rising linearly to 1 over warmup, then falling linearly to 0 at ``total_steps``."""
    if warmup_steps > 0 and step < warmup_steps:
        return (step + 1) / warmup_steps
    remaining = max(1, total_steps - warmup_steps)
    return max(0.0, (total_steps - step) / remaining)


def exponential_schedule(epoch: int, rate: float = 0.95) -> float:
    return rate ** epoch
