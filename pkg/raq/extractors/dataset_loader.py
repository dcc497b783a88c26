"""
Monta as partições de treino e de avaliação a partir da configuração.
"""
import logging
from typing import Tuple

import numpy as np

from ..config import ExperimentConfig
from ..untils.errors import ConfigError, ShapeError
from .idx_reader import read_idx
from .synthetic_shapes import gen_synthetic_shapes

logger = logging.getLogger(__name__)


def load_dataset(config: ExperimentConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Devolve (treino, avaliação) [n×H×W]; a avaliação são as últimas `eval_images` imagens."""
    if config.dataset == "synthetic_shapes":
        images = gen_synthetic_shapes(config.num_images + config.eval_images, config.image_size, config.data_seed)
    elif config.dataset == "idx":
        images = read_idx(config.data_path)
        if images.shape[1:] != (config.image_size, config.image_size):
            raise ShapeError(
                f"Imagens {images.shape[1:]} em {config.data_path} não batem com image_size={config.image_size}"
            )
    else:
        raise ConfigError(f"dataset desconhecido: {config.dataset}")
    if images.shape[0] <= config.eval_images:
        raise ConfigError(
            f"Conjunto com {images.shape[0]} imagens não comporta {config.eval_images} de avaliação"
        )
    train, held_out = images[:-config.eval_images], images[-config.eval_images:]
    logger.debug("Dados: %d treino, %d avaliação", len(train), len(held_out))
    return train, held_out
