"""Minimal dense-tensor core with reverse-mode differentiation."""

from . import ops
from .check import finite_difference_check, relative_discrepancy
from .module import Module
from .tensor import (
    NonFiniteError,
    ShapeError,
    Tensor,
    as_tensor,
    is_grad_enabled,
    no_grad,
    parameter,
    set_debug,
    set_dtype,
)

__all__ = [
    "Module",
    "NonFiniteError",
    "ShapeError",
    "Tensor",
    "as_tensor",
    "finite_difference_check",
    "is_grad_enabled",
    "no_grad",
    "ops",
    "parameter",
    "relative_discrepancy",
    "set_debug",
    "set_dtype",
]
