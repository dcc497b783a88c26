"""
Checagem de gradientes por diferenças finitas centrais.
"""
from typing import Callable, List, Sequence

import numpy as np

from .tensor import Tensor, backward


def numerical_gradient(fn: Callable[[], Tensor], param: Tensor, h: float = 1e-3) -> np.ndarray:
    """(f(w+h) − f(w−h)) / 2h para cada entrada de `param`."""
    param.data = np.array(param.data, copy=True, order="C")
    flat = param.data.reshape(-1)
    grad = np.zeros(flat.shape, dtype=np.float64)
    for idx in range(flat.size):
        original = flat[idx]
        flat[idx] = original + h
        f_plus = fn().item()
        flat[idx] = original - h
        f_minus = fn().item()
        flat[idx] = original
        grad[idx] = (f_plus - f_minus) / (2.0 * h)
    return grad.reshape(param.shape)


def analytic_gradients(fn: Callable[[], Tensor], params: Sequence[Tensor]) -> List[np.ndarray]:
    for p in params:
        p.grad = None
    backward(fn())
    return [np.zeros(p.shape) if p.grad is None else p.grad.astype(np.float64) for p in params]


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-8)
    return float(np.linalg.norm(analytic - numeric) / scale)


def max_relative_error(fn: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-3) -> float:
    """Maior erro relativo (norma) entre gradiente analítico e numérico sobre os parâmetros."""
    analytic = analytic_gradients(fn, params)
    errors = [relative_error(a, numerical_gradient(fn, p, h)) for a, p in zip(analytic, params)]
    return max(errors) if errors else 0.0
