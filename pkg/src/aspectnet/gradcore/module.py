"""Parameter containers with stable, dotted parameter names."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from .tensor import Tensor, parameter


class Module:
    """Base class holding named parameters and child modules.

    Registration order fixes iteration order, which the checkpoint format and
    the optimizers rely on for determinism.
    """

    def __init__(self) -> None:
        self._params: dict[str, Tensor] = {}
        self._children: dict[str, Module] = {}
        self.training = True

    def add_param(self, name: str, value: np.ndarray) -> Tensor:
        t = parameter(value, name=name)
        self._params[name] = t
        return t

    def add_child(self, name: str, child: "Module") -> "Module":
        self._children[name] = child
        return child

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, p in self._params.items():
            yield prefix + name, p
        for cname, child in self._children.items():
            yield from child.named_parameters(prefix + cname + ".")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray], strict: bool = True) -> None:
        own = dict(self.named_parameters())
        if strict and set(own) != set(state):
            missing = sorted(set(own) - set(state))
            extra = sorted(set(state) - set(own))
            raise KeyError(f"state mismatch: missing={missing} unexpected={extra}")
        for name, value in state.items():
            if name not in own:
                continue
            # shape changes are allowed (vocabulary growth)
            own[name].data = np.array(value, dtype=np.float64)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for child in self._children.values():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())
