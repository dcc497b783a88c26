"""
Avaliação taxa–distorção: reconstrói a partição de avaliação com o codebook
de cada (método, K̃) e gera um `EvalRecord` por combinação.
"""
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image

from .. import __version__
from ..autodiff.tensor import Tensor, no_grad
from ..extractors.dataset_loader import load_dataset
from ..metrics import EvalRecord, bits_per_index, bits_per_pixel, evaluate_reconstructions
from ..quantizers.vq_core import Codebook, load_codebook, quantize
from ..toy_model import ToyVqModel
from ..untils.errors import ConfigError
from .adaptation import adapt_codebook, check_compatible, resolve_method
from .training import Checkpoint, load_checkpoint

logger = logging.getLogger(__name__)

EVAL_BATCH_SIZE = 64


class CodebookCache:
    """Codebooks adaptados, gerados uma vez por (método, K̃) e reaproveitados na partição inteira."""

    def __init__(self):
        self._entries: Dict[Tuple[str, int], Codebook] = {}
        self.misses = 0

    def get(self, key: Tuple[str, int], factory: Callable[[], Codebook]) -> Codebook:
        if key not in self._entries:
            self.misses += 1
            self._entries[key] = factory()
        return self._entries[key]

    def __len__(self) -> int:
        return len(self._entries)


@dataclass
class Reconstruction:
    images: np.ndarray
    counts: np.ndarray
    seconds: float


@dataclass
class EvalRun:
    records: List[EvalRecord] = field(default_factory=list)
    timings: Dict[Tuple[str, int], float] = field(default_factory=dict)


def reconstruct(model: ToyVqModel, images: np.ndarray, codebook_fn: Callable[[], Codebook],
                batch_size: int = EVAL_BATCH_SIZE) -> Reconstruction:
    """Reconstrói `images` lote a lote; `codebook_fn` é chamado uma vez por lote."""
    outputs = []
    counts = None
    start = time.perf_counter()
    with no_grad():
        for first in range(0, images.shape[0], batch_size):
            batch = images[first:first + batch_size]
            x = Tensor(batch.reshape(batch.shape[0], 1, *batch.shape[1:]))
            codebook = codebook_fn()
            result = quantize(model.encode(x), codebook)
            outputs.append(model.decode(result.quantized).numpy().reshape(batch.shape))
            counts = result.usage_counts if counts is None else counts + result.usage_counts
    return Reconstruction(np.concatenate(outputs, axis=0), counts, time.perf_counter() - start)


def dump_reconstructions(images: np.ndarray, directory: Path) -> None:
    """PNG 8 bits em tons de cinza, um por imagem."""
    directory.mkdir(parents=True, exist_ok=True)
    pixels = np.clip(np.rint(images.astype(np.float64) * 255.0), 0, 255).astype(np.uint8)
    for index, image in enumerate(pixels):
        Image.fromarray(image).save(directory / f"img_{index:04d}.png")


def _evaluation_plan(methods: Sequence[str], sizes: Sequence[int], codebook_size: int) -> List[Tuple[str, int]]:
    plan = []
    for method in methods:
        for k_tilde in sizes:
            resolved = resolve_method(method, k_tilde, codebook_size)
            try:
                check_compatible(resolved, k_tilde, codebook_size)
            except ConfigError as exc:
                logger.warning("Ignorando %s K̃=%d: %s", method, k_tilde, exc)
                continue
            plan.append((method, k_tilde))
    return plan


def evaluate_checkpoint(
    ckpt: Checkpoint,
    methods: Sequence[str],
    sizes: Sequence[int],
    codebook_files: Sequence[Union[str, Path]] = (),
    use_cache: bool = True,
    dump_dir: Optional[Path] = None,
    batch_size: int = EVAL_BATCH_SIZE,
) -> EvalRun:
    config, model = ckpt.config, ckpt.model
    _, held_out = load_dataset(config)
    seed = config.seed
    run = EvalRun()
    cache = CodebookCache()

    for method, k_tilde in _evaluation_plan(methods, sizes, model.codebook.size):
        def factory(method=method, k_tilde=k_tilde) -> Codebook:
            return adapt_codebook(model, method, k_tilde, config, seed=seed)

        if use_cache:
            source = lambda key=(method, k_tilde), make=factory: cache.get(key, make)
        else:
            source = factory
        recon = reconstruct(model, held_out, source, batch_size)
        run.timings[(method, k_tilde)] = recon.seconds
        logger.info("%s K̃=%d avaliado em %.3fs%s", method, k_tilde, recon.seconds,
                    "" if use_cache else " (regenerando por lote)")
        run.records.append(evaluate_reconstructions(held_out, recon.images, recon.counts, k_tilde, method, seed))
        if dump_dir is not None:
            dump_reconstructions(recon.images, dump_dir / f"seed_{seed}" / f"{method}_k{k_tilde}")

    for path in codebook_files:
        codebook = load_codebook(path).detached()
        if codebook.dim != model.codebook.dim:
            raise ConfigError(f"Codebook {path} com d={codebook.dim}, modelo com d={model.codebook.dim}")
        recon = reconstruct(model, held_out, lambda cb=codebook: cb, batch_size)
        method = f"file:{Path(path).stem}"
        run.timings[(method, codebook.size)] = recon.seconds
        run.records.append(
            evaluate_reconstructions(held_out, recon.images, recon.counts, codebook.size, method, seed)
        )
    if dump_dir is not None:
        dump_reconstructions(held_out, dump_dir / f"seed_{seed}" / "original")
    return run


def write_eval_manifest(path: Path, checkpoints: Sequence[Path], run: EvalRun, config, use_cache: bool) -> None:
    lines = [
        f"raq_version = {__version__}",
        f"checkpoints = {','.join(str(p) for p in checkpoints)}",
        f"seeds = {','.join(str(s) for s in sorted({r.seed for r in run.records}))}",
        f"cache = {'true' if use_cache else 'false'}",
        f"codebook_size = {config.codebook_size}",
    ]
    for (method, k_tilde), seconds in sorted(run.timings.items()):
        lines.append(
            f"{method} k_tilde={k_tilde} bits_per_index={bits_per_index(k_tilde):.4f} "
            f"bpp={bits_per_pixel(k_tilde, config.latent_positions, config.pixels):.4f} seconds={seconds:.4f}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_eval(
    checkpoints: Sequence[Union[str, Path]],
    methods: Sequence[str],
    sizes: Optional[Sequence[int]] = None,
    codebook_files: Sequence[Union[str, Path]] = (),
    use_cache: bool = True,
    dump_dir: Optional[Union[str, Path]] = None,
    batch_size: int = EVAL_BATCH_SIZE,
) -> Tuple[EvalRun, List[Checkpoint]]:
    """Avalia cada checkpoint; `sizes=None` usa `eval_sizes` da configuração de cada um."""
    run = EvalRun()
    loaded = []
    for path in checkpoints:
        ckpt = load_checkpoint(path)
        loaded.append(ckpt)
        partial = evaluate_checkpoint(
            ckpt,
            methods,
            ckpt.config.eval_sizes if sizes is None else sizes,
            codebook_files=codebook_files,
            use_cache=use_cache,
            dump_dir=Path(dump_dir) if dump_dir is not None else None,
            batch_size=batch_size,
        )
        run.records.extend(partial.records)
        for key, seconds in partial.timings.items():
            run.timings[key] = run.timings.get(key, 0.0) + seconds
    return run, loaded
