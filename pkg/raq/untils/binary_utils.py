"""
Utilitários para leitura e escrita dos formatos binários (RQCB, RQS2, IDX).
"""
import struct
from typing import Tuple

import numpy as np

from .errors import CodebookFormatError


class ByteReader:
    """Leitor sequencial de um buffer com verificação de truncamento."""

    def __init__(self, payload: bytes, source: str = "<bytes>"):
        self.payload = payload
        self.source = source
        self.offset = 0

    def take(self, n: int) -> bytes:
        end = self.offset + n
        if end > len(self.payload):
            raise CodebookFormatError(
                f"Arquivo truncado ({self.source}): esperados {n} bytes no offset {self.offset}, "
                f"restam {len(self.payload) - self.offset}"
            )
        chunk = self.payload[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str) -> Tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def expect_magic(self, magic: bytes) -> None:
        found = self.take(len(magic))
        if found != magic:
            raise CodebookFormatError(
                f"Magic inválido em {self.source}: esperado {magic.hex(' ')}, encontrado {found.hex(' ')}"
            )

    def f32_array(self, count: int, shape: Tuple[int, ...]) -> np.ndarray:
        raw = self.take(4 * count)
        return np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(shape)

    def remaining(self) -> int:
        return len(self.payload) - self.offset


def f32_bytes(array: np.ndarray) -> bytes:
    """Serializa em float32 little-endian, ordem row-major."""
    return np.ascontiguousarray(array, dtype="<f4").tobytes()
