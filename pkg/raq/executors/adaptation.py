"""
Adaptação do codebook de um checkpoint para um tamanho K̃.
"""
import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.spatial.distance import pdist

from ..autodiff.tensor import no_grad
from ..config import ExperimentConfig
from ..quantizers.model_based import MmdConfig, dkm_reduce, ikm_increase, random_subset
from ..quantizers.seq2seq import generate_codebook
from ..quantizers.vq_core import Codebook, save_codebook
from ..toy_model import ToyVqModel
from ..untils.constants import ADAPT_METHODS, EVAL_METHODS
from ..untils.errors import ConfigError
from .training import load_checkpoint

logger = logging.getLogger(__name__)


def resolve_method(method: str, k_tilde: int, codebook_size: int) -> str:
    """`model_based` vira dkm (K̃ < K), baseline (K̃ = K) ou ikm (K̃ > K)."""
    if method not in EVAL_METHODS:
        raise ConfigError(f"Método desconhecido: {method} (opções: {', '.join(EVAL_METHODS)})")
    if method != "model_based":
        return method
    if k_tilde < codebook_size:
        return "dkm"
    if k_tilde > codebook_size:
        return "ikm"
    return "baseline"


def check_compatible(method: str, k_tilde: int, codebook_size: int) -> None:
    if k_tilde < 1:
        raise ConfigError(f"K̃ deve ser ≥ 1, recebido {k_tilde}")
    if method == "dkm" and k_tilde >= codebook_size:
        raise ConfigError(f"dkm exige K̃ < K (K̃={k_tilde}, K={codebook_size})")
    if method == "ikm" and k_tilde <= codebook_size:
        raise ConfigError(f"ikm exige K̃ > K (K̃={k_tilde}, K={codebook_size})")
    if method == "random_subset" and k_tilde > codebook_size:
        raise ConfigError(f"random_subset exige K̃ ≤ K (K̃={k_tilde}, K={codebook_size})")
    if method == "baseline" and k_tilde != codebook_size:
        raise ConfigError(f"baseline só avalia K̃ = K = {codebook_size}")
    if method == "seq2seq" and k_tilde > 4 * codebook_size:
        raise ConfigError(f"seq2seq gera no máximo 4K = {4 * codebook_size} vetores")


def adapt_codebook(model: ToyVqModel, method: str, k_tilde: int, config: ExperimentConfig,
                   seed: int = 0) -> Codebook:
    """Codebook ẽ (somente leitura) de tamanho K̃ para o método pedido."""
    codebook = model.codebook
    method = resolve_method(method, k_tilde, codebook.size)
    check_compatible(method, k_tilde, codebook.size)
    if method == "baseline":
        return codebook.detached()
    if method == "seq2seq":
        if model.adapter is None:
            raise ConfigError("Checkpoint sem adaptador: método seq2seq indisponível")
        if k_tilde > 2 * codebook.size:
            logger.warning("K̃=%d acima de 2K=%d: extrapolação além do intervalo de treino", k_tilde, 2 * codebook.size)
        with no_grad():
            adapted = generate_codebook(codebook, k_tilde, model.adapter, cross_forcing=config.cross_forcing)
        return adapted.detached()
    if method == "dkm":
        return dkm_reduce(codebook, k_tilde, tau=config.tau, seed=seed)
    if method == "ikm":
        return ikm_increase(codebook, k_tilde, MmdConfig(), tau=config.tau, seed=seed)
    if method == "random_subset":
        return random_subset(codebook, k_tilde, seed=seed)
    raise ConfigError(f"Método desconhecido: {method}")


def cmd_adapt(checkpoint: Union[str, Path], method: str, k_tilde: int, output: Union[str, Path],
              seed: Optional[int] = None) -> Codebook:
    """Carrega o checkpoint, adapta o codebook e grava o RQCB em `output`."""
    if method not in ADAPT_METHODS:
        raise ConfigError(f"Método de adaptação desconhecido: {method} (opções: {', '.join(ADAPT_METHODS)})")
    ckpt = load_checkpoint(checkpoint)
    seed = ckpt.config.seed if seed is None else seed
    adapted = adapt_codebook(ckpt.model, method, k_tilde, ckpt.config, seed=seed)
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    save_codebook(adapted, output)
    logger.info("Codebook %s K=%d → K̃=%d salvo em %s", method, ckpt.model.codebook.size, k_tilde, output)
    return adapted


def codebook_stats(codebook: Codebook) -> dict:
    """K, d, presença de EMA e estatísticas de normas e distâncias entre vetores."""
    vectors = codebook.numpy().astype(np.float64)
    norms = np.linalg.norm(vectors, axis=1)
    stats = {
        "K": codebook.size,
        "d": codebook.dim,
        "ema": codebook.has_ema,
        "norm_min": float(norms.min()),
        "norm_mean": float(norms.mean()),
        "norm_max": float(norms.max()),
    }
    if codebook.size > 1:
        dists = pdist(vectors)
        stats.update(dist_min=float(dists.min()), dist_mean=float(dists.mean()), dist_max=float(dists.max()))
    if codebook.has_ema:
        stats["ema_dead_codes"] = int(np.count_nonzero(codebook.ema_counts < 1e-3))
    return stats
