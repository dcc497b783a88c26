"""
Fixtures compartilhadas pelos testes.
"""
import numpy as np
import pytest

from raq.autodiff.tensor import default_dtype
from raq.config import ExperimentConfig
from raq.executors.training import cmd_train


def make_tiny_config(**changes) -> ExperimentConfig:
    """Configuração mínima para rodar o pipeline em segundos."""
    values = dict(
        num_images=32,
        eval_images=16,
        batch_size=8,
        codebook_size=8,
        k_min=4,
        embedding_dim=4,
        hidden_channels=4,
        steps=3,
        eval_sizes=[4, 8, 16],
        log_every=1,
        checkpoint_every=2,
    )
    values.update(changes)
    return ExperimentConfig(**values).validate()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def float64():
    """Precisão dupla para checagens por diferenças finitas."""
    with default_dtype(np.float64):
        yield


@pytest.fixture
def tiny_config():
    return make_tiny_config()


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory):
    """Checkpoint de poucos passos, compartilhado pelos testes que apenas o leem."""
    output = tmp_path_factory.mktemp("checkpoints") / "tiny"
    cmd_train(make_tiny_config(), output)
    return output


@pytest.fixture(scope="session")
def acceptance_config():
    """Topologia de referência: 16×16 → 4×4, d=8, K=32."""
    return ExperimentConfig(
        num_images=512,
        eval_images=128,
        steps=500,
        batch_size=32,
        codebook_size=32,
        embedding_dim=8,
        eval_sizes=[8, 16, 32, 64],
        log_every=100,
    ).validate()


@pytest.fixture
def make_config():
    """Fábrica de configurações mínimas com campos alterados."""
    return make_tiny_config
