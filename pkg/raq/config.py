"""
Configurações padrão e configuração de experimentos.

O arquivo de configuração é texto plano `chave = valor` (comentários com `#`),
com uma chave por campo de `ExperimentConfig`; chaves desconhecidas são erro.
"""
import argparse
import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Union, get_type_hints

from .untils.constants import (
    BETA_COMMIT,
    DKM_TAU,
    GAMMA_EMA,
    K_MAX,
    K_MIN,
    LEARNING_RATE,
    SEED_ENV_VAR,
    SEQ2SEQ_LAYERS,
    WEIGHT_DECAY,
)
from .untils.errors import ConfigError

# Configurações padrão
DEFAULT_RUN_NAME = "raq_run"
DEFAULT_DEBUG = False
DEFAULT_EVAL_SIZES = [8, 16, 32, 64]
DATASETS = ("synthetic_shapes", "idx")
UPDATE_MODES = ("gradient", "ema")

# Caminhos relativos ao diretório do pacote
PACKAGE_DIR = os.path.dirname(os.path.abspath(__file__))
PROJECT_ROOT = os.path.dirname(PACKAGE_DIR)


def get_default_paths():
    """Retorna os caminhos padrão baseados na estrutura do projeto."""
    return {
        'data': os.path.join(PROJECT_ROOT, 'data'),
        'runs': os.path.join(PROJECT_ROOT, 'runs'),
        'reports': os.path.join(PROJECT_ROOT, 'reports'),
    }


@dataclass
class ExperimentConfig:
    # dados
    dataset: str = "synthetic_shapes"
    data_path: str = ""
    num_images: int = 512
    eval_images: int = 128
    data_seed: int = 0
    image_size: int = 16
    augment_flip: bool = False
    # topologia
    latent_size: int = 4
    embedding_dim: int = 8
    codebook_size: int = 32
    hidden_channels: int = 16
    num_layers: int = SEQ2SEQ_LAYERS
    use_adapter: bool = True
    # treino
    k_min: int = K_MIN
    k_max: int = K_MAX
    beta: float = BETA_COMMIT
    gamma: float = GAMMA_EMA
    tau: float = DKM_TAU
    learning_rate: float = LEARNING_RATE
    weight_decay: float = WEIGHT_DECAY
    steps: int = 500
    batch_size: int = 32
    codebook_update_mode: str = "ema"
    cross_forcing: bool = True
    log_every: int = 50
    checkpoint_every: int = 100
    # avaliação
    eval_sizes: List[int] = field(default_factory=lambda: list(DEFAULT_EVAL_SIZES))
    seed: int = 0

    def validate(self) -> "ExperimentConfig":
        if self.dataset not in DATASETS:
            raise ConfigError(f"dataset desconhecido: {self.dataset} (opções: {', '.join(DATASETS)})")
        if self.dataset == "idx" and not self.data_path:
            raise ConfigError("dataset 'idx' exige data_path")
        if self.codebook_update_mode not in UPDATE_MODES:
            raise ConfigError(f"codebook_update_mode inválido: {self.codebook_update_mode}")
        if self.dataset == "synthetic_shapes" and self.image_size < 16:
            raise ConfigError(f"image_size deve ser ≥ 16, recebido {self.image_size}")
        if self.image_size != 4 * self.latent_size:
            raise ConfigError(
                f"A topologia reduz a resolução por 4: image_size={self.image_size} exige latent_size={self.image_size // 4}"
            )
        if not 1 <= self.k_min <= self.codebook_size <= self.k_max:
            raise ConfigError(f"K={self.codebook_size} fora de [k_min={self.k_min}, k_max={self.k_max}]")
        if not self.eval_sizes or any(k < 1 for k in self.eval_sizes):
            raise ConfigError(f"eval_sizes devem ser ≥ 1: {self.eval_sizes}")
        for name in ("num_images", "eval_images", "embedding_dim", "hidden_channels", "num_layers",
                     "steps", "batch_size", "log_every", "checkpoint_every"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} deve ser ≥ 1, recebido {getattr(self, name)}")
        if self.beta < 0 or not 0 <= self.gamma < 1 or self.tau <= 0 or self.learning_rate <= 0:
            raise ConfigError("Hiperparâmetros fora do intervalo (β ≥ 0, 0 ≤ γ < 1, τ > 0, lr > 0)")
        return self

    @property
    def latent_positions(self) -> int:
        return self.latent_size * self.latent_size

    @property
    def pixels(self) -> int:
        return self.image_size * self.image_size


# ----------------------------------------------------------------------
# Conversão de valores
# ----------------------------------------------------------------------
def _field_types() -> Dict[str, object]:
    hints = get_type_hints(ExperimentConfig)
    return {f.name: hints[f.name] for f in dataclasses.fields(ExperimentConfig)}


def parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("true", "1", "yes", "sim"):
        return True
    if value in ("false", "0", "no", "nao", "não"):
        return False
    raise ConfigError(f"Booleano inválido: {text!r}")


def _parse_value(name: str, kind, text: str):
    text = text.strip()
    try:
        if kind is bool:
            return parse_bool(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind is str:
            return text
        if kind == List[int]:
            return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"Valor inválido para {name}: {text!r}") from exc
    raise ConfigError(f"Tipo não suportado para {name}: {kind}")


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    return str(value)


def config_to_text(config: ExperimentConfig) -> str:
    lines = ["# Configuração do experimento RAQ"]
    for f in dataclasses.fields(config):
        lines.append(f"{f.name} = {_format_value(getattr(config, f.name))}")
    return "\n".join(lines) + "\n"


def config_from_text(text: str, source: str = "<texto>") -> ExperimentConfig:
    types = _field_types()
    values = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"{source}:{number}: linha sem '=': {raw!r}")
        if key not in types:
            raise ConfigError(f"{source}:{number}: chave desconhecida '{key}'")
        values[key] = _parse_value(key, types[key], value)
    return ExperimentConfig(**values)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Arquivo de configuração não encontrado: {path}")
    return config_from_text(path.read_text(encoding="utf-8"), source=str(path))


def save_config(config: ExperimentConfig, path: Union[str, Path]) -> None:
    Path(path).write_text(config_to_text(config), encoding="utf-8")


def apply_env_overrides(config: ExperimentConfig, environ: Optional[Mapping[str, str]] = None) -> ExperimentConfig:
    """RAQ_SEED sobrescreve `seed`."""
    environ = os.environ if environ is None else environ
    raw = environ.get(SEED_ENV_VAR)
    if raw is None or not raw.strip():
        return config
    return dataclasses.replace(config, seed=_parse_value("seed", int, raw))


# ----------------------------------------------------------------------
# Integração com argparse
# ----------------------------------------------------------------------
def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    """Uma flag `--nome-do-campo` para cada campo de `ExperimentConfig`."""
    group = parser.add_argument_group("configuração do experimento")
    for name, kind in _field_types().items():
        flag = "--" + name.replace("_", "-")
        group.add_argument(flag, dest=f"cfg_{name}", default=None, metavar=name.upper(),
                           help=f"sobrescreve '{name}' da configuração")


def config_from_args(args: argparse.Namespace, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """Aplica, na ordem: arquivo (`base`), flags da linha de comando e variável de ambiente."""
    config = base or ExperimentConfig()
    updates = {}
    for name, kind in _field_types().items():
        raw = getattr(args, f"cfg_{name}", None)
        if raw is not None:
            updates[name] = _parse_value(name, kind, raw)
    if updates:
        config = dataclasses.replace(config, **updates)
    return apply_env_overrides(config).validate()
