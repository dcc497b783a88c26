"""
Leitura e escrita de arquivos IDX (formato do MNIST) com imagens u8 em 3-D.

Cabeçalho: magic 0x00 0x00 0x08 0x03, depois três u32 big-endian (n, linhas,
colunas), seguidos de n·linhas·colunas bytes. Arquivos `.gz` são aceitos.
"""
import gzip
import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from ..untils.binary_utils import ByteReader
from ..untils.constants import IDX_U8_3D_MAGIC
from ..untils.errors import CodebookFormatError, ShapeError

logger = logging.getLogger(__name__)


def parse_idx(payload: bytes, source: str = "<bytes>") -> np.ndarray:
    """Decodifica um payload IDX u8 3-D em imagens float32 [n×H×W] normalizadas para [0, 1]."""
    reader = ByteReader(payload, source)
    reader.expect_magic(IDX_U8_3D_MAGIC)
    count, rows, cols = reader.unpack(">III")
    pixels = reader.take(count * rows * cols)
    if reader.remaining():
        raise CodebookFormatError(f"{reader.remaining()} bytes sobrando no fim de {source}")
    images = np.frombuffer(pixels, dtype=np.uint8).reshape(count, rows, cols)
    return images.astype(np.float32) / 255.0


def read_idx(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Arquivo IDX não encontrado: {path}")
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as handle:
            payload = handle.read()
    else:
        payload = path.read_bytes()
    images = parse_idx(payload, source=str(path))
    logger.info("%d imagens %dx%d lidas de %s", *images.shape, path)
    return images


def idx_bytes(images: np.ndarray) -> bytes:
    """Codifica imagens [n×H×W] em [0, 1] como IDX u8 (arredondamento para o inteiro mais próximo)."""
    images = np.asarray(images)
    if images.ndim != 3:
        raise ShapeError(f"IDX u8 3-D exige [n×H×W], recebido {images.shape}")
    pixels = np.clip(np.rint(images.astype(np.float64) * 255.0), 0, 255).astype(np.uint8)
    return IDX_U8_3D_MAGIC + struct.pack(">III", *images.shape) + pixels.tobytes()


def write_idx(images: np.ndarray, path: Union[str, Path]) -> None:
    Path(path).write_bytes(idx_bytes(images))
