"""
Quantizador vetorial base.

Codebook com acumuladores EMA, quantização por vizinho mais próximo, perda VQ
de três termos (reconstrução, embedding, commitment), estimador
straight-through e o formato binário RQCB.
"""
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor
from ..untils.binary_utils import ByteReader, f32_bytes
from ..untils.constants import BETA_COMMIT, CODEBOOK_MAGIC, CODEBOOK_VERSION, EMA_EPS, GAMMA_EMA
from ..untils.errors import CodebookFormatError, ConfigError, ShapeError

logger = logging.getLogger(__name__)

UPDATE_MODES = ("gradient", "ema")

# Limite de elementos do bloco [linhas × K × d] usado no cálculo de distâncias
_DISTANCE_CHUNK = 1 << 22


@dataclass
class Codebook:
    """Matriz K×d de vetores de código, com acumuladores EMA opcionais (N_i, m_i)."""

    vectors: Tensor
    ema_counts: Optional[np.ndarray] = None
    ema_sums: Optional[np.ndarray] = None
    update_mode: str = "gradient"

    def __post_init__(self):
        if self.vectors.ndim != 2 or self.vectors.shape[0] < 1 or self.vectors.shape[1] < 1:
            raise ShapeError(f"Codebook exige matriz K×d com K, d ≥ 1, recebido {self.vectors.shape}")
        if self.update_mode not in UPDATE_MODES:
            raise ConfigError(f"Modo de atualização desconhecido: {self.update_mode}")
        if self.update_mode == "ema" and self.ema_counts is None:
            self.ema_counts = np.ones(self.size, dtype=np.float64)
            self.ema_sums = self.vectors.data.astype(np.float64).copy()
        if self.ema_counts is not None:
            self.ema_counts = np.asarray(self.ema_counts, dtype=np.float64).reshape(self.size)
            self.ema_sums = np.asarray(self.ema_sums, dtype=np.float64).reshape(self.size, self.dim)

    @classmethod
    def initialize(
        cls,
        size: int,
        dim: int,
        rng: np.random.Generator,
        update_mode: str = "ema",
        name: str = "codebook",
    ) -> "Codebook":
        """Inicialização uniforme em (−1/K, 1/K)."""
        data = rng.uniform(-1.0 / size, 1.0 / size, size=(size, dim))
        return cls(Tensor(data, requires_grad=True, name=name), update_mode=update_mode)

    @classmethod
    def from_array(cls, data: np.ndarray, update_mode: str = "gradient") -> "Codebook":
        return cls(Tensor(data), update_mode=update_mode)

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def has_ema(self) -> bool:
        return self.ema_counts is not None

    def numpy(self) -> np.ndarray:
        return self.vectors.numpy()

    def detached(self) -> "Codebook":
        """Cópia desligada do grafo e sem estado EMA (codebook apenas para leitura)."""
        return Codebook(Tensor(self.vectors.data), update_mode="gradient")


@dataclass
class QuantizationResult:
    """Índices selecionados, latente quantizado (ligado ao codebook) e contagem de uso por código."""

    indices: np.ndarray
    quantized: Tensor
    usage_counts: np.ndarray

    @property
    def codebook_size(self) -> int:
        return int(self.usage_counts.shape[0])


def nearest_code_indices(points: np.ndarray, codes: np.ndarray) -> np.ndarray:
    """argmin_i ‖p − e_i‖² por linha; empates ficam com o menor índice."""
    points = np.asarray(points, dtype=np.float64)
    codes = np.asarray(codes, dtype=np.float64)
    rows = max(1, _DISTANCE_CHUNK // max(1, codes.shape[0] * codes.shape[1]))
    out = np.empty(points.shape[0], dtype=np.int64)
    for start in range(0, points.shape[0], rows):
        block = points[start:start + rows]
        dists = ((block[:, None, :] - codes[None, :, :]) ** 2).sum(axis=-1)
        out[start:start + rows] = np.argmin(dists, axis=1)
    return out


def quantize(z_e: Tensor, codebook: Codebook) -> QuantizationResult:
    """Mapeia cada posição de z_e [..., d] ao código mais próximo."""
    if codebook.size < 1:
        raise ShapeError("Codebook vazio")
    if z_e.ndim < 2 or z_e.shape[-1] != codebook.dim:
        raise ShapeError(f"Dimensão do latente {z_e.shape} incompatível com codebook d={codebook.dim}")
    grid = z_e.shape[:-1]
    flat = z_e.data.reshape(-1, codebook.dim)
    indices = nearest_code_indices(flat, codebook.vectors.data)
    counts = np.bincount(indices, minlength=codebook.size).astype(np.int64)
    quantized = ops.take_rows(codebook.vectors, indices.reshape(grid))
    return QuantizationResult(indices=indices.reshape(grid), quantized=quantized, usage_counts=counts)


def straight_through(z_e: Tensor, z_q: Tensor) -> Tensor:
    """Forward devolve z_q; backward copia o gradiente para z_e e nada para z_q."""
    if z_e.shape != z_q.shape:
        raise ShapeError(f"straight_through: formas {z_e.shape} e {z_q.shape}")
    return Tensor.from_op(z_q.data.copy(), (z_e,), lambda g: (g,), "straight_through")


@dataclass
class VqLoss:
    recon: Tensor
    embed: Tensor
    commit: Tensor
    total: Tensor

    def values(self) -> Dict[str, float]:
        return {
            "recon": self.recon.item(),
            "embed": self.embed.item(),
            "commit": self.commit.item(),
            "total": self.total.item(),
        }


def _mean_sq_norm(diff: Tensor) -> Tensor:
    """Média, sobre as posições, de ‖·‖² no último eixo."""
    positions = diff.size // diff.shape[-1]
    return ops.mul(ops.sum_(ops.square(diff)), 1.0 / positions)


def vq_loss(x: Tensor, x_hat: Tensor, z_e: Tensor, z_q: Tensor, beta: float = BETA_COMMIT) -> VqLoss:
    """recon = MSE(x, x̂); embed = ‖sg[z_e] − z_q‖²; commit = ‖sg[z_q] − z_e‖²; total = recon + embed + β·commit."""
    if x.shape != x_hat.shape:
        raise ShapeError(f"vq_loss: x {x.shape} e x̂ {x_hat.shape}")
    if z_e.shape != z_q.shape:
        raise ShapeError(f"vq_loss: z_e {z_e.shape} e z_q {z_q.shape}")
    if beta < 0:
        raise ConfigError(f"beta deve ser ≥ 0, recebido {beta}")
    recon = ops.mean(ops.square(ops.sub(x, x_hat)))
    embed = _mean_sq_norm(ops.sub(z_e.detach(), z_q))
    commit = _mean_sq_norm(ops.sub(z_q.detach(), z_e))
    total = ops.add(ops.add(recon, embed), ops.mul(commit, float(beta)))
    return VqLoss(recon=recon, embed=embed, commit=commit, total=total)


def ema_update(codebook: Codebook, result: QuantizationResult, z_e: Tensor, gamma: float = GAMMA_EMA) -> None:
    """N_i ← γN_i + (1−γ)n_i; m_i ← γm_i + (1−γ)Σz; e_i ← m_i / max(N_i, ε)."""
    if codebook.update_mode != "ema" or not codebook.has_ema:
        raise ConfigError("ema_update exige codebook em modo 'ema'")
    if result.codebook_size != codebook.size:
        raise ShapeError(f"Resultado com K={result.codebook_size} para codebook com K={codebook.size}")
    flat = z_e.data.reshape(-1, codebook.dim).astype(np.float64)
    idx = result.indices.reshape(-1)
    counts = np.bincount(idx, minlength=codebook.size).astype(np.float64)
    sums = np.zeros((codebook.size, codebook.dim), dtype=np.float64)
    np.add.at(sums, idx, flat)
    codebook.ema_counts = gamma * codebook.ema_counts + (1.0 - gamma) * counts
    codebook.ema_sums = gamma * codebook.ema_sums + (1.0 - gamma) * sums
    vectors = codebook.ema_sums / np.maximum(codebook.ema_counts, EMA_EPS)[:, None]
    codebook.vectors.data = vectors.astype(codebook.vectors.data.dtype)


# ----------------------------------------------------------------------
# Formato RQCB
# ----------------------------------------------------------------------
def codebook_to_bytes(codebook: Codebook) -> bytes:
    """magic "RQCB", u16 versão, u32 K, u32 d, K·d f32, u8 flag EMA, [N_i (K f32), m_i (K·d f32)]."""
    parts = [
        CODEBOOK_MAGIC,
        struct.pack("<HII", CODEBOOK_VERSION, codebook.size, codebook.dim),
        f32_bytes(codebook.vectors.data),
    ]
    if codebook.has_ema:
        parts.append(struct.pack("<B", 1))
        parts.append(f32_bytes(codebook.ema_counts))
        parts.append(f32_bytes(codebook.ema_sums))
    else:
        parts.append(struct.pack("<B", 0))
    return b"".join(parts)


def codebook_from_bytes(payload: bytes, source: str = "<bytes>") -> Codebook:
    reader = ByteReader(payload, source)
    reader.expect_magic(CODEBOOK_MAGIC)
    version, size, dim = reader.unpack("<HII")
    if version != CODEBOOK_VERSION:
        raise CodebookFormatError(f"Versão RQCB não suportada em {source}: {version}")
    if size < 1 or dim < 1:
        raise CodebookFormatError(f"Dimensões inválidas em {source}: K={size}, d={dim}")
    vectors = reader.f32_array(size * dim, (size, dim))
    (flag,) = reader.unpack("<B")
    counts = sums = None
    if flag == 1:
        counts = reader.f32_array(size, (size,))
        sums = reader.f32_array(size * dim, (size, dim))
    elif flag != 0:
        raise CodebookFormatError(f"Flag EMA inválida em {source}: {flag:#04x}")
    if reader.remaining():
        raise CodebookFormatError(f"{reader.remaining()} bytes sobrando no fim de {source}")
    mode = "ema" if flag == 1 else "gradient"
    return Codebook(
        Tensor(vectors, requires_grad=True, name="codebook"),
        ema_counts=counts,
        ema_sums=sums,
        update_mode=mode,
    )


def save_codebook(codebook: Codebook, path: Union[str, Path]) -> None:
    Path(path).write_bytes(codebook_to_bytes(codebook))
    logger.debug("Codebook K=%d d=%d salvo em %s", codebook.size, codebook.dim, path)


def load_codebook(path: Union[str, Path]) -> Codebook:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Codebook não encontrado: {path}")
    return codebook_from_bytes(path.read_bytes(), source=str(path))
