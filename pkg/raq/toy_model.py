"""
Modelo VQ de brinquedo: encoder convolucional φ (duas convs de passo 2 e um
bloco residual), decoder θ espelhado com convs transpostas, codebook e
adaptador de taxa opcional.
"""
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .autodiff import ops
from .autodiff.optim import AdamW
from .autodiff.tensor import Tensor
from .config import ExperimentConfig
from .quantizers.seq2seq import RateAdapter
from .quantizers.vq_core import Codebook
from .untils.errors import ConfigError, ShapeError

logger = logging.getLogger(__name__)


def _param_shapes(hidden: int, dim: int) -> Dict[str, Tuple[int, ...]]:
    """Formas dos pesos; kernels de conv em [F×C×k×k] e de conv transposta em [C×F×k×k]."""
    return {
        "enc.conv1.w": (hidden, 1, 4, 4),
        "enc.conv1.b": (hidden,),
        "enc.conv2.w": (hidden, hidden, 4, 4),
        "enc.conv2.b": (hidden,),
        "enc.res.conv3.w": (hidden, hidden, 3, 3),
        "enc.res.conv3.b": (hidden,),
        "enc.res.conv1.w": (hidden, hidden, 1, 1),
        "enc.res.conv1.b": (hidden,),
        "enc.proj.w": (dim, hidden, 1, 1),
        "enc.proj.b": (dim,),
        "dec.proj.w": (hidden, dim, 3, 3),
        "dec.proj.b": (hidden,),
        "dec.res.conv3.w": (hidden, hidden, 3, 3),
        "dec.res.conv3.b": (hidden,),
        "dec.res.conv1.w": (hidden, hidden, 1, 1),
        "dec.res.conv1.b": (hidden,),
        "dec.up1.w": (hidden, hidden, 4, 4),
        "dec.up1.b": (hidden,),
        "dec.up2.w": (hidden, 1, 4, 4),
        "dec.up2.b": (1,),
    }


def _fan_in(name: str, shape: Tuple[int, ...]) -> int:
    if len(shape) == 1:
        return shape[0]
    if ".up" in name:
        return shape[0] * shape[2] * shape[3]
    return shape[1] * shape[2] * shape[3]


class ToyVqModel:
    """VQ-VAE 16×16 → 4×4×d. Parâmetros de φ e θ ficam em `params`, por nome."""

    def __init__(self, params: Dict[str, Tensor], codebook: Codebook, adapter: Optional[RateAdapter] = None):
        self.params = params
        self.codebook = codebook
        self.adapter = adapter

    @classmethod
    def initialize(cls, config: ExperimentConfig, rng: np.random.Generator) -> "ToyVqModel":
        params = {}
        for name, shape in _param_shapes(config.hidden_channels, config.embedding_dim).items():
            if name.endswith(".b"):
                data = np.zeros(shape)
            else:
                bound = 1.0 / math.sqrt(_fan_in(name, shape))
                data = rng.uniform(-bound, bound, size=shape)
            params[name] = Tensor(data, requires_grad=True, name=name)
        codebook = Codebook.initialize(
            config.codebook_size, config.embedding_dim, rng, update_mode=config.codebook_update_mode
        )
        adapter = None
        if config.use_adapter:
            adapter = RateAdapter.initialize(config.embedding_dim, config.num_layers, rng)
        return cls(params, codebook, adapter)

    # ------------------------------------------------------------------
    def _conv(self, x: Tensor, prefix: str, stride: int = 1, pad: int = 0) -> Tensor:
        return ops.channel_bias(ops.conv2d(x, self.params[f"{prefix}.w"], stride, pad), self.params[f"{prefix}.b"])

    def _up(self, x: Tensor, prefix: str) -> Tensor:
        return ops.channel_bias(
            ops.conv_transpose2d(x, self.params[f"{prefix}.w"], stride=2, pad=1), self.params[f"{prefix}.b"]
        )

    def _residual(self, x: Tensor, prefix: str) -> Tensor:
        h = self._conv(ops.relu(x), f"{prefix}.conv3", pad=1)
        h = self._conv(ops.relu(h), f"{prefix}.conv1")
        return ops.add(x, h)

    def encode(self, x: Tensor) -> Tensor:
        """[B×1×H×W] → z_e [B×M×N×d]."""
        if x.ndim != 4 or x.shape[1] != 1:
            raise ShapeError(f"Entrada do encoder deve ser B×1×H×W, recebido {x.shape}")
        h = ops.relu(self._conv(x, "enc.conv1", stride=2, pad=1))
        h = self._conv(h, "enc.conv2", stride=2, pad=1)
        h = ops.relu(self._residual(h, "enc.res"))
        z = self._conv(h, "enc.proj")
        return ops.permute(z, (0, 2, 3, 1))

    def decode(self, z_q: Tensor) -> Tensor:
        """[B×M×N×d] → x̂ [B×1×H×W] em (0, 1)."""
        h = ops.permute(z_q, (0, 3, 1, 2))
        h = self._conv(h, "dec.proj", pad=1)
        h = ops.relu(self._residual(h, "dec.res"))
        h = ops.relu(self._up(h, "dec.up1"))
        return ops.sigmoid(self._up(h, "dec.up2"))

    # ------------------------------------------------------------------
    def encoder_decoder_parameters(self) -> List[Tensor]:
        return list(self.params.values())

    def parameters(self) -> List[Tensor]:
        params = self.encoder_decoder_parameters() + [self.codebook.vectors]
        if self.adapter is not None:
            params.extend(self.adapter.parameters())
        return params

    def parameter_counts(self) -> Dict[str, int]:
        """Contagem por componente, para o manifesto."""
        counts = {
            "encoder": sum(p.size for n, p in self.params.items() if n.startswith("enc.")),
            "decoder": sum(p.size for n, p in self.params.items() if n.startswith("dec.")),
            "codebook": self.codebook.vectors.size,
            "adapter": self.adapter.parameter_count() if self.adapter is not None else 0,
        }
        counts["total"] = sum(counts.values())
        return counts


# ----------------------------------------------------------------------
# Persistência dos pesos de φ/θ e do estado do otimizador
# ----------------------------------------------------------------------
def save_model_state(model: ToyVqModel, path: Union[str, Path], optimizer: Optional[AdamW] = None, step: int = 0) -> None:
    arrays = {f"param/{name}": p.data for name, p in model.params.items()}
    if optimizer is not None:
        arrays.update(optimizer.state_arrays())
    if model.codebook.has_ema:
        arrays["ema/counts"] = model.codebook.ema_counts
        arrays["ema/sums"] = model.codebook.ema_sums
    arrays["meta/step"] = np.asarray(step, dtype=np.int64)
    with open(path, "wb") as handle:
        np.savez(handle, **arrays)


def load_model_state(
    model: ToyVqModel, path: Union[str, Path], optimizer: Optional[AdamW] = None
) -> int:
    """Carrega pesos (e estado do AdamW) no modelo; devolve o passo salvo."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Pesos do modelo não encontrados: {path}")
    with np.load(path) as archive:
        arrays = {key: archive[key] for key in archive.files}
    for name, p in model.params.items():
        key = f"param/{name}"
        if key not in arrays:
            raise ConfigError(f"Parâmetro ausente em {path}: {name}")
        if arrays[key].shape != p.shape:
            raise ShapeError(f"Parâmetro {name} com forma {arrays[key].shape}, esperado {p.shape}")
        p.data = arrays[key].astype(p.data.dtype)
    if model.codebook.has_ema and "ema/counts" in arrays:
        # acumuladores em 64 bits (o RQCB guarda apenas 32)
        model.codebook.ema_counts = arrays["ema/counts"].astype(np.float64)
        model.codebook.ema_sums = arrays["ema/sums"].astype(np.float64)
    if optimizer is not None:
        optimizer.load_state_arrays({k: v for k, v in arrays.items() if k.startswith("adam_")})
    return int(arrays.get("meta/step", 0))
