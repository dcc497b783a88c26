"""
Treino do modelo RAQ (Algoritmo de treino: atualização VQ seguida da atualização RAQ
em cada lote) e gravação/carga de checkpoints.
"""
import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from .. import __version__
from ..autodiff.optim import AdamW
from ..config import ExperimentConfig, load_config, save_config
from ..extractors.dataset_loader import load_dataset
from ..quantizers.seq2seq import load_adapter, save_adapter, train_step, training_size_range
from ..quantizers.vq_core import load_codebook, save_codebook
from ..toy_model import ToyVqModel, load_model_state, save_model_state
from ..untils.constants import (
    ADAPTER_FILE,
    CODEBOOK_FILE,
    CONFIG_FILE,
    MANIFEST_FILE,
    MODEL_FILE,
    TRAIN_LOG_FILE,
)
from ..untils.errors import TrainingDivergedError
from .report_writer import read_training_log, write_training_log

logger = logging.getLogger(__name__)


@dataclass
class Checkpoint:
    config: ExperimentConfig
    model: ToyVqModel
    optimizer: AdamW
    step: int
    path: Path


@dataclass
class TrainResult:
    output_dir: Path
    steps: int
    log: List[dict] = field(default_factory=list)


def make_optimizer(config: ExperimentConfig) -> AdamW:
    return AdamW(lr=config.learning_rate, weight_decay=config.weight_decay)


def sample_batch(images: np.ndarray, config: ExperimentConfig, rng: np.random.Generator) -> np.ndarray:
    """Lote [B×H×W] sorteado sem reposição (com reposição se faltar imagem); espelhamento opcional."""
    replace = images.shape[0] < config.batch_size
    batch = images[rng.choice(images.shape[0], size=config.batch_size, replace=replace)].copy()
    if config.augment_flip:
        flip = rng.random(config.batch_size) < 0.5
        batch[flip] = batch[flip, :, ::-1]
    return batch


def write_manifest(path: Path, config: ExperimentConfig, model: ToyVqModel, step: int) -> None:
    counts = model.parameter_counts()
    k_min, k_max = training_size_range(config)
    lines = [
        f"raq_version = {__version__}",
        f"seed = {config.seed}",
        f"data_seed = {config.data_seed}",
        f"step = {step}",
        f"config_file = {CONFIG_FILE}",
        f"codebook_update_mode = {config.codebook_update_mode}",
        f"cross_forcing = {'true' if config.cross_forcing else 'false'}",
        f"train_k_tilde_range = {k_min},{k_max}",
        "ikm_init = normal(0, variance=d^-1/2) por coordenada",
        *(f"params_{name} = {value}" for name, value in counts.items()),
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_checkpoint(output_dir: Path, config: ExperimentConfig, model: ToyVqModel, optimizer: AdamW,
                    step: int, log: List[dict]) -> None:
    output_dir.mkdir(parents=True, exist_ok=True)
    save_model_state(model, output_dir / MODEL_FILE, optimizer, step)
    save_codebook(model.codebook, output_dir / CODEBOOK_FILE)
    if model.adapter is not None:
        save_adapter(model.adapter, output_dir / ADAPTER_FILE)
    save_config(config, output_dir / CONFIG_FILE)
    write_manifest(output_dir / MANIFEST_FILE, config, model, step)
    write_training_log(log, output_dir / TRAIN_LOG_FILE)
    logger.debug("Checkpoint do passo %d salvo em %s", step, output_dir)


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """Reconstrói configuração, modelo e otimizador a partir de um diretório de checkpoint."""
    path = Path(path)
    if not (path / MODEL_FILE).is_file():
        raise FileNotFoundError(f"Checkpoint não encontrado: {path}")
    config = load_config(path / CONFIG_FILE).validate()
    model = ToyVqModel.initialize(config, np.random.default_rng(config.seed))
    model.codebook = load_codebook(path / CODEBOOK_FILE)
    if config.use_adapter:
        model.adapter = load_adapter(path / ADAPTER_FILE)
    optimizer = make_optimizer(config)
    step = load_model_state(model, path / MODEL_FILE, optimizer)
    return Checkpoint(config=config, model=model, optimizer=optimizer, step=step, path=path)


def cmd_train(config: ExperimentConfig, output_dir: Union[str, Path], resume: bool = False) -> TrainResult:
    """Executa `config.steps` passos; com `resume`, continua do checkpoint em `output_dir`.

    Uma perda não finita interrompe o treino e preserva o último checkpoint gravado.
    """
    output_dir = Path(output_dir)
    train_images, _ = load_dataset(config)
    start = 0
    log: List[dict] = []
    if resume and (output_dir / MODEL_FILE).is_file():
        checkpoint = load_checkpoint(output_dir)
        model, optimizer, start = checkpoint.model, checkpoint.optimizer, checkpoint.step
        log = [row for row in read_training_log(output_dir / TRAIN_LOG_FILE) if row["step"] < start]
        logger.info("Retomando de %s no passo %d", output_dir, start)
    else:
        model = ToyVqModel.initialize(config, np.random.default_rng(config.seed))
        optimizer = make_optimizer(config)
    if config.use_adapter and 2 * config.codebook_size < config.k_max:
        logger.debug("K̃ de treino limitado a 2K=%d", 2 * config.codebook_size)
    output_dir.mkdir(parents=True, exist_ok=True)

    for step in range(start, config.steps):
        rng = np.random.default_rng([config.seed, step])
        batch = sample_batch(train_images, config, rng)
        try:
            metrics = train_step(batch, model, config, optimizer, rng)
        except TrainingDivergedError as exc:
            logger.error("Treino divergiu no passo %d: %s", step, exc)
            write_training_log(log, output_dir / TRAIN_LOG_FILE)
            raise
        log.append(metrics.as_row(step))
        if (step + 1) % config.log_every == 0 or step == start:
            logger.info(
                "passo %d: L_VQ=%.5f L_RAQ=%.5f K̃=%d perplexidade=%.2f/%.2f",
                step, metrics.loss_vq, metrics.loss_raq, metrics.k_tilde,
                metrics.perplexity_vq, metrics.perplexity_raq,
            )
        if (step + 1) % config.checkpoint_every == 0 and step + 1 < config.steps:
            save_checkpoint(output_dir, config, model, optimizer, step + 1, log)

    if log:
        window = max(1, min(20, len(log) // 5))
        logger.info(
            "L_VQ média: %.5f nos primeiros %d passo(s), %.5f nos últimos %d",
            last_mean(log, "loss_vq", window, first=True), window, last_mean(log, "loss_vq", window), window,
        )
    save_checkpoint(output_dir, config, model, optimizer, max(start, config.steps), log)
    return TrainResult(output_dir=output_dir, steps=config.steps, log=log)


def seed_sweep(config: ExperimentConfig, seeds: int) -> List[Tuple[int, ExperimentConfig]]:
    """Sementes seed, seed+1, …, cada uma com seu subdiretório `seed_<s>`."""
    return [(config.seed + i, dataclasses.replace(config, seed=config.seed + i)) for i in range(seeds)]


def cmd_train_sweep(config: ExperimentConfig, output_dir: Union[str, Path], seeds: int,
                    resume: bool = False) -> List[TrainResult]:
    output_dir = Path(output_dir)
    if seeds <= 1:
        return [cmd_train(config, output_dir, resume=resume)]
    results = []
    for seed, seeded in seed_sweep(config, seeds):
        logger.info("Treinando semente %d", seed)
        results.append(cmd_train(seeded, output_dir / f"seed_{seed}", resume=resume))
    return results


def checkpoint_dirs(path: Union[str, Path]) -> List[Path]:
    """Um checkpoint, ou os subdiretórios `seed_*` de uma varredura."""
    path = Path(path)
    if (path / MODEL_FILE).is_file():
        return [path]
    found = sorted(p for p in path.glob("seed_*") if (p / MODEL_FILE).is_file())
    if not found:
        raise FileNotFoundError(f"Checkpoint não encontrado: {path}")
    return found


def last_mean(log: List[dict], key: str, count: int, first: bool = False) -> Optional[float]:
    """Média de `key` nas últimas (ou, com `first`, nas primeiras) `count` linhas do log."""
    values = [row[key] for row in log]
    if not values:
        return None
    window = values[:count] if first else values[-count:]
    return float(np.mean(window))
