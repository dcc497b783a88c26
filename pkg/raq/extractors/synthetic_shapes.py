"""
Gerador do conjunto sintético: imagens em tons de cinza com 1 a 3 retângulos
alinhados aos eixos e círculos de intensidade aleatória sobre fundo preto.
"""
import logging

import numpy as np

from ..untils.errors import ConfigError

logger = logging.getLogger(__name__)

MIN_IMAGE_SIZE = 16


def _draw_rectangle(canvas: np.ndarray, rng: np.random.Generator, intensity: float) -> None:
    size = canvas.shape[0]
    height, width = rng.integers(3, size // 2 + 1, size=2)
    top = rng.integers(0, size - height + 1)
    left = rng.integers(0, size - width + 1)
    region = canvas[top:top + height, left:left + width]
    np.maximum(region, intensity, out=region)


def _draw_circle(canvas: np.ndarray, rng: np.random.Generator, intensity: float) -> None:
    size = canvas.shape[0]
    radius = rng.uniform(2.0, size / 4)
    cy, cx = rng.uniform(radius, size - radius, size=2)
    rows, cols = np.ogrid[:size, :size]
    mask = (rows + 0.5 - cy) ** 2 + (cols + 0.5 - cx) ** 2 <= radius ** 2
    canvas[mask] = np.maximum(canvas[mask], intensity)


def gen_synthetic_shapes(n: int, size: int = 16, seed: int = 0) -> np.ndarray:
    """Gera `n` imagens [n×size×size] em [0, 1], determinísticas para a mesma semente."""
    if size < MIN_IMAGE_SIZE:
        raise ConfigError(f"Tamanho mínimo da imagem é {MIN_IMAGE_SIZE}, recebido {size}")
    if n < 0:
        raise ConfigError(f"Número de imagens deve ser ≥ 0, recebido {n}")
    rng = np.random.default_rng(seed)
    images = np.zeros((n, size, size), dtype=np.float32)
    for canvas in images:
        for _ in range(rng.integers(1, 4)):
            intensity = float(rng.uniform(0.3, 1.0))
            if rng.random() < 0.5:
                _draw_rectangle(canvas, rng, intensity)
            else:
                _draw_circle(canvas, rng, intensity)
    logger.debug("%d imagens sintéticas %dx%d geradas (semente %d)", n, size, size, seed)
    return images
