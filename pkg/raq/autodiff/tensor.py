"""
Tensor denso com diferenciação automática em modo reverso.

Cada operação registra suas entradas e uma regra de retropropagação no tensor
de saída; `Tape.record` reconstrói a ordem topológica a partir da perda e
`backward` percorre essa fita uma única vez, em ordem reversa.
"""
import logging
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..untils.errors import NonFiniteError, RaqError, ShapeError

logger = logging.getLogger(__name__)

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_local = threading.local()


def get_default_dtype() -> type:
    """Precisão de armazenamento corrente (float32 por padrão)."""
    return getattr(_local, "dtype", np.float32)


@contextmanager
def default_dtype(dtype) -> Iterator[None]:
    """Troca temporariamente a precisão de armazenamento (ex.: float64 nas checagens numéricas)."""
    previous = get_default_dtype()
    _local.dtype = np.dtype(dtype).type
    try:
        yield
    finally:
        _local.dtype = previous


def is_grad_enabled() -> bool:
    return getattr(_local, "grad_enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Desliga o registro de operações (inferência, avaliação)."""
    previous = is_grad_enabled()
    _local.grad_enabled = False
    try:
        yield
    finally:
        _local.grad_enabled = previous


@contextmanager
def enable_grad() -> Iterator[None]:
    """Religa o registro dentro de um bloco `no_grad` (otimizações internas como o IKM)."""
    previous = is_grad_enabled()
    _local.grad_enabled = True
    try:
        yield
    finally:
        _local.grad_enabled = previous


def check_finite(array: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(array)):
        bad = int(np.size(array) - np.count_nonzero(np.isfinite(array)))
        raise NonFiniteError(f"{bad} valor(es) não finito(s) produzido(s) por '{where}'")


class Tensor:
    """Valor denso n-dimensional com acumulador de gradiente opcional."""

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: Optional[str] = None):
        array = np.array(data, dtype=dtype or get_default_dtype())
        check_finite(array, name or "Tensor")
        self.data: np.ndarray = array
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self.op: Optional[str] = None
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None

    @classmethod
    def from_op(cls, data: np.ndarray, parents: Sequence["Tensor"], backward: BackwardFn, op: str) -> "Tensor":
        """Cria a saída de uma operação; só registra o nó se alguma entrada exige gradiente."""
        out = cls.__new__(cls)
        array = np.asarray(data)
        if array.dtype.kind != "f":
            array = array.astype(get_default_dtype())
        check_finite(array, op)
        out.data = array
        out.grad = None
        out.name = None
        out.op = op
        tracked = is_grad_enabled() and any(p.requires_grad for p in parents)
        out.requires_grad = tracked
        out._parents = tuple(parents) if tracked else ()
        out._backward = backward if tracked else None
        return out

    # ------------------------------------------------------------------
    # Propriedades
    # ------------------------------------------------------------------
    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() exige tensor de um elemento, forma {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> "Tensor":
        """Operador stop-gradient: mesmo valor, sem ligação com o grafo."""
        out = Tensor.__new__(Tensor)
        out.data = self.data
        out.requires_grad = False
        out.grad = None
        out.name = self.name
        out.op = "detach"
        out._parents = ()
        out._backward = None
        return out

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad}{label})"

    # ------------------------------------------------------------------
    # Operadores (delegam para `ops`)
    # ------------------------------------------------------------------
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from . import ops
        return ops.mul(other, self)

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __neg__(self):
        from . import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, key):
        from . import ops
        return ops.slice_(self, key)

    def reshape(self, *shape):
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def permute(self, *axes):
        from . import ops
        return ops.permute(self, axes)

    def sum(self, axis=None, keepdims: bool = False):
        from . import ops
        return ops.sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        from . import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)


@dataclass
class TapeEntry:
    """Uma operação registrada: entradas, saída e regra de retropropagação."""

    output: Tensor
    inputs: Tuple[Tensor, ...]
    backward: BackwardFn
    op: str


class Tape:
    """Lista ordenada das operações que produzem um tensor (entradas antes das saídas)."""

    def __init__(self, nodes: List[Tensor]):
        self.nodes = nodes
        self.entries: List[TapeEntry] = [
            TapeEntry(output=n, inputs=n._parents, backward=n._backward, op=n.op or "?")
            for n in nodes
            if n._backward is not None
        ]

    @classmethod
    def record(cls, output: Tensor) -> "Tape":
        """Ordenação topológica (DFS pós-ordem iterativa) do subgrafo que exige gradiente."""
        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return cls(order)

    def __len__(self) -> int:
        return len(self.entries)

    def run(self, output: Tensor, seed: np.ndarray) -> None:
        """Percorre a fita em ordem reversa, visitando cada operação uma vez."""
        grads: Dict[int, np.ndarray] = {id(output): seed}
        for node in reversed(self.nodes):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                g = np.asarray(g, dtype=node.data.dtype)
                node.grad = g.copy() if node.grad is None else node.grad + g
            if node._backward is None:
                continue
            parent_grads = node._backward(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                if pg.shape != parent.data.shape:
                    raise ShapeError(
                        f"Gradiente de forma {pg.shape} para entrada {parent.data.shape} em '{node.op}'"
                    )
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg


def backward(loss: Tensor) -> None:
    """Popula `.grad` de todo tensor que exige gradiente e é alcançável a partir da perda.

    Chamadas repetidas sem zerar os gradientes acumulam.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward exige perda escalar, forma recebida {loss.shape}")
    if not loss.requires_grad:
        raise RaqError("A perda não está na fita (nenhuma entrada exige gradiente)")
    tape = Tape.record(loss)
    logger.debug("backward: %d operações na fita", len(tape))
    tape.run(loss, np.ones_like(loss.data))
