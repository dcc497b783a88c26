"""
Operações diferenciáveis sobre `Tensor`.

Broadcast limitado a escalar↔tensor e formas iguais; expansões explícitas de
eixos de tamanho 1 passam por `expand`. Reduções acumulam em 64 bits.
As regras de retropropagação capturam os arrays do forward (nunca o tensor),
então atualizações de parâmetros feitas depois do forward não alteram o backward.
"""
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ..untils.errors import ShapeError
from .tensor import Tensor

Operand = Union[Tensor, int, float]
Axis = Optional[Union[int, Tuple[int, ...]]]


def as_tensor(value: Operand, dtype=None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype=dtype)


def _pair(a: Operand, b: Operand, op: str) -> Tuple[Tensor, Tensor]:
    if not isinstance(a, Tensor) and not isinstance(b, Tensor):
        raise ShapeError(f"'{op}' exige ao menos um Tensor")
    if not isinstance(a, Tensor):
        a = Tensor(a, dtype=b.dtype)
    if not isinstance(b, Tensor):
        b = Tensor(b, dtype=a.dtype)
    if a.shape != b.shape and a.ndim != 0 and b.ndim != 0:
        raise ShapeError(f"Formas incompatíveis em '{op}': {a.shape} e {b.shape}")
    return a, b


def _fit(grad: np.ndarray, shape: Tuple[int, ...], dtype) -> np.ndarray:
    """Soma o gradiente de volta para um operando escalar."""
    if len(shape) == 0 and grad.ndim != 0:
        return np.asarray(grad.sum(dtype=np.float64), dtype=dtype)
    return grad.astype(dtype, copy=False)


def _out_dtype(*tensors: Tensor):
    return np.result_type(*[t.data.dtype for t in tensors])


# ----------------------------------------------------------------------
# Elementares
# ----------------------------------------------------------------------
def add(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b, "add")
    sa, sb, da, db = a.shape, b.shape, a.dtype, b.dtype
    dtype = _out_dtype(a, b)

    def _backward(g):
        return _fit(g, sa, da), _fit(g, sb, db)

    return Tensor.from_op((a.data + b.data).astype(dtype, copy=False), (a, b), _backward, "add")


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b, "sub")
    sa, sb, da, db = a.shape, b.shape, a.dtype, b.dtype
    dtype = _out_dtype(a, b)

    def _backward(g):
        return _fit(g, sa, da), _fit(-g, sb, db)

    return Tensor.from_op((a.data - b.data).astype(dtype, copy=False), (a, b), _backward, "sub")


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b, "mul")
    ad, bd = a.data, b.data
    dtype = _out_dtype(a, b)

    def _backward(g):
        return _fit(g * bd, ad.shape, ad.dtype), _fit(g * ad, bd.shape, bd.dtype)

    return Tensor.from_op((ad * bd).astype(dtype, copy=False), (a, b), _backward, "mul")


def div(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b, "div")
    ad, bd = a.data, b.data
    dtype = _out_dtype(a, b)

    def _backward(g):
        return _fit(g / bd, ad.shape, ad.dtype), _fit(-g * ad / (bd * bd), bd.shape, bd.dtype)

    return Tensor.from_op((ad / bd).astype(dtype, copy=False), (a, b), _backward, "div")


def neg(a: Tensor) -> Tensor:
    return Tensor.from_op(-a.data, (a,), lambda g: (-g,), "neg")


def sigmoid(a: Tensor) -> Tensor:
    y = expit(a.data).astype(a.dtype, copy=False)
    return Tensor.from_op(y, (a,), lambda g: (g * y * (1.0 - y),), "sigmoid")


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return Tensor.from_op(y, (a,), lambda g: (g * (1.0 - y * y),), "tanh")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return Tensor.from_op(np.where(mask, a.data, 0).astype(a.dtype), (a,), lambda g: (g * mask,), "relu")


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    return Tensor.from_op(y, (a,), lambda g: (g * y,), "exp")


def log(a: Tensor) -> Tensor:
    x = a.data
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.log(x)
    return Tensor.from_op(y, (a,), lambda g: (g / x,), "log")


def square(a: Tensor) -> Tensor:
    x = a.data
    return Tensor.from_op(x * x, (a,), lambda g: (2.0 * g * x,), "square")


ELEMENTWISE_OPS: Dict[str, Callable[..., Tensor]] = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "div": div,
    "neg": neg,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "relu": relu,
    "exp": exp,
    "log": log,
    "square": square,
}


def elementwise(op: str, *operands: Operand) -> Tensor:
    """Despacha uma operação elementar pelo nome (`add`, `sub`, `mul`, `sigmoid`, `tanh`, `relu`, ...)."""
    try:
        fn = ELEMENTWISE_OPS[op]
    except KeyError:
        raise ValueError(f"Operação elementar desconhecida: {op}") from None
    return fn(*operands)


# ----------------------------------------------------------------------
# Álgebra linear e reduções
# ----------------------------------------------------------------------
def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Produto [m×k]·[k×n] com acumulação em 64 bits."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul exige [m×k]·[k×n], recebido {a.shape}·{b.shape}")
    dtype = _out_dtype(a, b)
    ad = a.data.astype(np.float64)
    bd = b.data.astype(np.float64)

    def _backward(g):
        g64 = g.astype(np.float64)
        return (g64 @ bd.T).astype(a.dtype), (ad.T @ g64).astype(b.dtype)

    return Tensor.from_op((ad @ bd).astype(dtype), (a, b), _backward, "matmul")


def _normalize_axis(axis: Axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def sum_(a: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    shape = a.shape
    axes = _normalize_axis(axis, a.ndim)
    out = a.data.sum(axis=axes, dtype=np.float64, keepdims=keepdims).astype(a.dtype)

    def _backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, shape).astype(a.dtype),)

    return Tensor.from_op(out, (a,), _backward, "sum")


def mean(a: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axis(axis, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes])) if axes else 1
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / count)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted.astype(np.float64))
    y = (e / e.sum(axis=axis, keepdims=True)).astype(a.dtype)

    def _backward(g):
        inner = (g * y).sum(axis=axis, keepdims=True, dtype=np.float64)
        return ((y * (g - inner)).astype(a.dtype),)

    return Tensor.from_op(y, (a,), _backward, "softmax")


# ----------------------------------------------------------------------
# Forma
# ----------------------------------------------------------------------
def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    original = a.shape
    return Tensor.from_op(a.data.reshape(tuple(shape)), (a,), lambda g: (g.reshape(original),), "reshape")


def permute(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    out = np.ascontiguousarray(np.transpose(a.data, axes))
    return Tensor.from_op(out, (a,), lambda g: (np.transpose(g, inverse),), "permute")


def expand(a: Tensor, shape: Sequence[int]) -> Tensor:
    """Expande eixos de tamanho 1 para `shape` (a única forma de broadcast além de escalar)."""
    shape = tuple(shape)
    if len(shape) != a.ndim or any(s != t and s != 1 for s, t in zip(a.shape, shape)):
        raise ShapeError(f"expand inválido de {a.shape} para {shape}")
    axes = tuple(i for i, (s, t) in enumerate(zip(a.shape, shape)) if s == 1 and t != 1)

    def _backward(g):
        return (g.sum(axis=axes, keepdims=True, dtype=np.float64).astype(a.dtype) if axes else g,)

    return Tensor.from_op(np.broadcast_to(a.data, shape).copy(), (a,), _backward, "expand")


def slice_(a: Tensor, key) -> Tensor:
    """Fatiamento básico (sem índices avançados)."""
    shape, dtype = a.shape, a.dtype

    def _backward(g):
        full = np.zeros(shape, dtype=dtype)
        full[key] += g
        return (full,)

    return Tensor.from_op(np.array(a.data[key]), (a,), _backward, "slice")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeError("concat de lista vazia")
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    dtype = _out_dtype(*tensors)
    out = np.concatenate([t.data for t in tensors], axis=axis).astype(dtype, copy=False)

    def _backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor.from_op(out, tuple(tensors), _backward, "concat")


def take_rows(table: Tensor, indices: np.ndarray) -> Tensor:
    """Seleciona linhas de uma matriz [K×d]; saída com forma `indices.shape + (d,)`."""
    if table.ndim != 2:
        raise ShapeError(f"take_rows exige matriz, recebido {table.shape}")
    indices = np.asarray(indices, dtype=np.int64)
    shape, dtype = table.shape, table.dtype

    def _backward(g):
        full = np.zeros(shape, dtype=np.float64)
        np.add.at(full, indices.reshape(-1), g.reshape(-1, shape[1]))
        return (full.astype(dtype),)

    return Tensor.from_op(table.data[indices], (table,), _backward, "take_rows")


# ----------------------------------------------------------------------
# Convoluções
# ----------------------------------------------------------------------
def _conv_output_size(size: int, kernel: int, stride: int, pad: int) -> int:
    span = size + 2 * pad - kernel
    if span < 0 or span % stride != 0:
        raise ShapeError(
            f"Tamanho de saída não inteiro: ({size}+2·{pad}−{kernel})/{stride}+1"
        )
    return span // stride + 1


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """Correlação cruzada: x [B×C×H×W], kernel [F×C×k×k] → [B×F×H'×W']."""
    if x.ndim != 4 or kernel.ndim != 4 or x.shape[1] != kernel.shape[1] or kernel.shape[2] != kernel.shape[3]:
        raise ShapeError(f"conv2d: entrada {x.shape} incompatível com kernel {kernel.shape}")
    _, _, height, width = x.shape
    k = kernel.shape[2]
    out_h = _conv_output_size(height, k, stride, pad)
    out_w = _conv_output_size(width, k, stride, pad)
    dtype = _out_dtype(x, kernel)
    xp = np.pad(x.data.astype(np.float64), ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    w = kernel.data.astype(np.float64)
    windows = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    out = np.einsum("bchwij,fcij->bfhw", windows, w, optimize=True)

    def _backward(g):
        g64 = g.astype(np.float64)
        gw = np.einsum("bchwij,bfhw->fcij", windows, g64, optimize=True)
        gxp = np.zeros_like(xp)
        for i in range(k):
            for j in range(k):
                gxp[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += np.einsum(
                    "bfhw,fc->bchw", g64, w[:, :, i, j], optimize=True
                )
        gx = gxp[:, :, pad:pad + height, pad:pad + width]
        return gx.astype(x.dtype), gw.astype(kernel.dtype)

    return Tensor.from_op(out.astype(dtype), (x, kernel), _backward, "conv2d")


def conv_transpose2d(x: Tensor, kernel: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """Convolução transposta: x [B×C×H×W], kernel [C×F×k×k] → [B×F×((H−1)s−2p+k)×...]."""
    if x.ndim != 4 or kernel.ndim != 4 or x.shape[1] != kernel.shape[0] or kernel.shape[2] != kernel.shape[3]:
        raise ShapeError(f"conv_transpose2d: entrada {x.shape} incompatível com kernel {kernel.shape}")
    batch, _, height, width = x.shape
    k = kernel.shape[2]
    full_h = (height - 1) * stride + k
    full_w = (width - 1) * stride + k
    out_h = full_h - 2 * pad
    out_w = full_w - 2 * pad
    if out_h <= 0 or out_w <= 0:
        raise ShapeError(f"conv_transpose2d: saída vazia para entrada {x.shape}, k={k}, pad={pad}")
    dtype = _out_dtype(x, kernel)
    xd = x.data.astype(np.float64)
    w = kernel.data.astype(np.float64)
    full = np.zeros((batch, kernel.shape[1], full_h, full_w))
    for i in range(k):
        for j in range(k):
            full[:, :, i:i + stride * height:stride, j:j + stride * width:stride] += np.einsum(
                "bchw,cf->bfhw", xd, w[:, :, i, j], optimize=True
            )
    out = full[:, :, pad:pad + out_h, pad:pad + out_w]

    def _backward(g):
        gfull = np.zeros_like(full)
        gfull[:, :, pad:pad + out_h, pad:pad + out_w] = g
        windows = sliding_window_view(gfull, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
        gx = np.einsum("bfhwij,cfij->bchw", windows, w, optimize=True)
        gw = np.einsum("bchw,bfhwij->cfij", xd, windows, optimize=True)
        return gx.astype(x.dtype), gw.astype(kernel.dtype)

    return Tensor.from_op(out.astype(dtype), (x, kernel), _backward, "conv_transpose2d")


def channel_bias(x: Tensor, bias: Tensor) -> Tensor:
    """Soma um viés por canal [F] a um mapa [B×F×H×W]."""
    if bias.ndim != 1 or x.ndim != 4 or x.shape[1] != bias.shape[0]:
        raise ShapeError(f"channel_bias: viés {bias.shape} incompatível com {x.shape}")
    return add(x, expand(reshape(bias, (1, bias.shape[0], 1, 1)), x.shape))


def row_bias(x: Tensor, bias: Tensor) -> Tensor:
    """Soma um viés [n] a cada linha de uma matriz [m×n]."""
    if bias.ndim != 1 or x.ndim != 2 or x.shape[1] != bias.shape[0]:
        raise ShapeError(f"row_bias: viés {bias.shape} incompatível com {x.shape}")
    return add(x, expand(reshape(bias, (1, bias.shape[0])), x.shape))


def pairwise_sq_dists(a: Tensor, b: Tensor) -> Tensor:
    """Distâncias euclidianas quadradas [n×m] entre linhas de a [n×d] e b [m×d]."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ShapeError(f"pairwise_sq_dists: {a.shape} e {b.shape}")
    n, d = a.shape
    m = b.shape[0]
    diff = sub(expand(reshape(a, (n, 1, d)), (n, m, d)), expand(reshape(b, (1, m, d)), (n, m, d)))
    return sum_(square(diff), axis=2)
