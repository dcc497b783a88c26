"""
Otimizadores: SGD e AdamW (decaimento de peso desacoplado).

As atualizações trocam o array `data` do parâmetro por um novo array; o
chamador zera os gradientes depois de cada passo.
"""
from dataclasses import dataclass, field
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np

from ..untils.constants import ADAMW_BETAS, ADAMW_EPS, LEARNING_RATE, WEIGHT_DECAY
from ..untils.errors import MissingGradientError
from .tensor import Tensor, check_finite


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None


def _require_grad(p: Tensor) -> np.ndarray:
    if p.grad is None:
        raise MissingGradientError(f"Parâmetro sem gradiente: {p.name or p.shape}")
    return p.grad


def sgd_step(params: Sequence[Tensor], lr: float) -> None:
    """w ← w − lr·∇w."""
    for p in params:
        g = _require_grad(p)
        new = p.data - lr * g
        check_finite(new, f"sgd_step({p.name or p.shape})")
        p.data = new.astype(p.data.dtype, copy=False)


@dataclass
class AdamState:
    """Momentos e contagem de passos por parâmetro (chave = nome do parâmetro)."""

    steps: Dict[str, int] = field(default_factory=dict)
    exp_avg: Dict[str, np.ndarray] = field(default_factory=dict)
    exp_avg_sq: Dict[str, np.ndarray] = field(default_factory=dict)


def _state_key(p: Tensor) -> str:
    return p.name if p.name else f"id:{id(p)}"


def adamw_step(
    params: Sequence[Tensor],
    state: AdamState,
    lr: float = LEARNING_RATE,
    betas: Tuple[float, float] = ADAMW_BETAS,
    weight_decay: float = WEIGHT_DECAY,
    eps: float = ADAMW_EPS,
) -> None:
    """Um passo AdamW em cada parâmetro, com correção de viés por parâmetro."""
    beta1, beta2 = betas
    for p in params:
        g = _require_grad(p).astype(np.float64)
        key = _state_key(p)
        t = state.steps.get(key, 0) + 1
        m = state.exp_avg.get(key)
        v = state.exp_avg_sq.get(key)
        if m is None:
            m = np.zeros_like(g)
            v = np.zeros_like(g)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        new = p.data.astype(np.float64) * (1.0 - lr * weight_decay) - lr * m_hat / (np.sqrt(v_hat) + eps)
        check_finite(new, f"adamw_step({p.name or p.shape})")
        p.data = new.astype(p.data.dtype)
        state.steps[key] = t
        state.exp_avg[key] = m
        state.exp_avg_sq[key] = v


class AdamW:
    """Mantém o estado do AdamW entre as duas atualizações de cada lote."""

    def __init__(
        self,
        lr: float = LEARNING_RATE,
        betas: Tuple[float, float] = ADAMW_BETAS,
        weight_decay: float = WEIGHT_DECAY,
        eps: float = ADAMW_EPS,
    ):
        self.lr = lr
        self.betas = betas
        self.weight_decay = weight_decay
        self.eps = eps
        self.state = AdamState()

    def step(self, params: Sequence[Tensor]) -> None:
        adamw_step(params, self.state, lr=self.lr, betas=self.betas, weight_decay=self.weight_decay, eps=self.eps)

    def state_arrays(self) -> Dict[str, np.ndarray]:
        """Estado achatado para `np.savez`."""
        arrays: Dict[str, np.ndarray] = {}
        for key, t in self.state.steps.items():
            arrays[f"adam_t/{key}"] = np.asarray(t, dtype=np.int64)
            arrays[f"adam_m/{key}"] = self.state.exp_avg[key]
            arrays[f"adam_v/{key}"] = self.state.exp_avg_sq[key]
        return arrays

    def load_state_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        self.state = AdamState()
        for name, value in arrays.items():
            kind, _, key = name.partition("/")
            if kind == "adam_t":
                self.state.steps[key] = int(value)
            elif kind == "adam_m":
                self.state.exp_avg[key] = np.asarray(value, dtype=np.float64)
            elif kind == "adam_v":
                self.state.exp_avg_sq[key] = np.asarray(value, dtype=np.float64)
