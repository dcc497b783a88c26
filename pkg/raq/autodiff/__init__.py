"""
Biblioteca mínima de tensores com diferenciação automática em modo reverso.
"""
from .tensor import Tape, Tensor, backward, default_dtype, enable_grad, get_default_dtype, no_grad
from .ops import (
    conv2d,
    conv_transpose2d,
    elementwise,
    matmul,
    softmax,
)
from .optim import AdamW, adamw_step, sgd_step, zero_grad

__all__ = [
    "Tape",
    "Tensor",
    "backward",
    "default_dtype",
    "enable_grad",
    "get_default_dtype",
    "no_grad",
    "conv2d",
    "conv_transpose2d",
    "elementwise",
    "matmul",
    "softmax",
    "AdamW",
    "adamw_step",
    "sgd_step",
    "zero_grad",
]
