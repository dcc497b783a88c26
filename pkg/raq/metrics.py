"""
Métricas de avaliação: MSE, PSNR, SSIM, perplexidade e uso do codebook,
além das taxas (bits por índice e por pixel) usadas nos relatórios.
"""
import math
from dataclasses import asdict, dataclass
from typing import Dict, Sequence

import numpy as np
from scipy.stats import entropy
from skimage.metrics import structural_similarity

from .untils.constants import PSNR_CAP_DB, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW
from .untils.errors import ConfigError, ShapeError


@dataclass
class EvalRecord:
    """Uma linha do relatório de avaliação (ordem das colunas do CSV)."""

    k_tilde: int
    method: str
    mse: float
    psnr: float
    ssim: float
    perplexity: float
    usage: int
    seed: int

    def as_row(self) -> Dict[str, object]:
        return asdict(self)


def _check_pair(x: np.ndarray, x_hat: np.ndarray) -> None:
    if x.shape != x_hat.shape:
        raise ShapeError(f"Formas diferentes: {x.shape} e {x_hat.shape}")


def mse(x: np.ndarray, x_hat: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    _check_pair(x, x_hat)
    return float(np.mean((x - x_hat) ** 2))


def psnr_from_mse(value: float, data_range: float = 1.0) -> float:
    if not data_range > 0:
        raise ConfigError(f"data_range deve ser > 0, recebido {data_range}")
    if value <= 0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(data_range ** 2 / value))


def psnr(x: np.ndarray, x_hat: np.ndarray, data_range: float = 1.0) -> float:
    """10·log10(range²/MSE), limitado a 100 dB (x == x̂)."""
    return psnr_from_mse(mse(x, x_hat), data_range)


def ssim(
    x: np.ndarray,
    x_hat: np.ndarray,
    window: int = SSIM_WINDOW,
    sigma: float = SSIM_SIGMA,
    data_range: float = 1.0,
) -> float:
    """SSIM médio com janela gaussiana, apenas nas posições válidas, e média sobre o lote.

    Aceita uma imagem [H×W] ou lotes [B×H×W] / [B×1×H×W].
    """
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    _check_pair(x, x_hat)
    images = x.reshape(-1, x.shape[-2], x.shape[-1])
    others = x_hat.reshape(images.shape)
    if min(images.shape[-2:]) < window:
        raise ShapeError(f"Imagem {images.shape[-2:]} menor que a janela {window}")
    scores = [
        structural_similarity(
            a,
            b,
            data_range=data_range,
            gaussian_weights=True,
            sigma=sigma,
            win_size=window,
            use_sample_covariance=False,
            K1=SSIM_K1,
            K2=SSIM_K2,
        )
        for a, b in zip(images, others)
    ]
    return float(np.mean(scores))


def perplexity(counts: Sequence[int]) -> float:
    """exp(−Σ p log p) com p = contagens normalizadas e 0·log0 = 0."""
    counts = np.asarray(counts, dtype=np.float64)
    if counts.ndim != 1 or np.any(counts < 0):
        raise ConfigError("Contagens devem ser um vetor não negativo")
    if counts.sum() <= 0:
        raise ConfigError("Perplexidade indefinida para contagens todas nulas")
    return float(np.exp(entropy(counts)))


def usage(counts: Sequence[int]) -> int:
    """Número de códigos com contagem positiva."""
    return int(np.count_nonzero(np.asarray(counts)))


def bits_per_index(k_tilde: int) -> float:
    return math.log2(k_tilde)


def bits_per_pixel(k_tilde: int, latent_positions: int, pixels: int) -> float:
    """M·N·log2 K̃ / (H·W)."""
    return latent_positions * math.log2(k_tilde) / pixels


def evaluate_reconstructions(
    x: np.ndarray,
    x_hat: np.ndarray,
    counts: Sequence[int],
    k_tilde: int,
    method: str,
    seed: int,
    data_range: float = 1.0,
) -> EvalRecord:
    value = mse(x, x_hat)
    return EvalRecord(
        k_tilde=int(k_tilde),
        method=method,
        mse=value,
        psnr=psnr_from_mse(value, data_range),
        ssim=ssim(x, x_hat, data_range=data_range),
        perplexity=perplexity(counts),
        usage=usage(counts),
        seed=int(seed),
    )
