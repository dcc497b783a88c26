"""
Módulo de adaptação de taxa G_ψ: Seq2Seq recorrente que lê o codebook original
como sequência e gera um codebook adaptado de tamanho arbitrário K̃ seguindo o
cronograma de cross-forcing. Inclui a perda RAQ, o sorteio de K̃ e o passo de
treino com as duas atualizações sequenciais (L_VQ e depois L_RAQ).
"""
import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..autodiff import ops
from ..autodiff.optim import AdamW, zero_grad
from ..autodiff.tensor import Tensor, backward
from ..metrics import perplexity
from ..untils.binary_utils import ByteReader, f32_bytes
from ..untils.constants import ADAPTER_MAGIC, ADAPTER_VERSION, BETA_COMMIT, SEQ2SEQ_LAYERS
from ..untils.errors import CodebookFormatError, ConfigError, NonFiniteError, ShapeError, TrainingDivergedError
from .vq_core import Codebook, VqLoss, ema_update, quantize, straight_through, vq_loss

if TYPE_CHECKING:
    from ..config import ExperimentConfig
    from ..toy_model import ToyVqModel

logger = logging.getLogger(__name__)

State = Tuple[List[Tensor], List[Tensor]]


# ----------------------------------------------------------------------
# Células recorrentes
# ----------------------------------------------------------------------
@dataclass
class LstmCell:
    """Célula LSTM padrão (portas i, f, g, o nessa ordem) com entrada e estado de dimensão d."""

    w_ih: Tensor
    w_hh: Tensor
    bias: Tensor

    @property
    def hidden(self) -> int:
        return self.w_hh.shape[0]

    def parameters(self) -> List[Tensor]:
        return [self.w_ih, self.w_hh, self.bias]

    def step(self, x: Tensor, h: Tensor, c: Tensor) -> Tuple[Tensor, Tensor]:
        n = self.hidden
        gates = ops.row_bias(ops.add(ops.matmul(x, self.w_ih), ops.matmul(h, self.w_hh)), self.bias)
        i = ops.sigmoid(gates[:, 0:n])
        f = ops.sigmoid(gates[:, n:2 * n])
        g = ops.tanh(gates[:, 2 * n:3 * n])
        o = ops.sigmoid(gates[:, 3 * n:4 * n])
        c_next = ops.add(ops.mul(f, c), ops.mul(i, g))
        h_next = ops.mul(o, ops.tanh(c_next))
        return h_next, c_next


def _init_cell(dim: int, rng: Optional[np.random.Generator], prefix: str) -> LstmCell:
    if rng is None:
        w_ih = np.zeros((dim, 4 * dim))
        w_hh = np.zeros((dim, 4 * dim))
        bias = np.zeros(4 * dim)
    else:
        bound = 1.0 / math.sqrt(dim)
        w_ih = rng.uniform(-bound, bound, size=(dim, 4 * dim))
        w_hh = rng.uniform(-bound, bound, size=(dim, 4 * dim))
        bias = np.zeros(4 * dim)
        bias[dim:2 * dim] = 1.0
    return LstmCell(
        Tensor(w_ih, requires_grad=True, name=f"{prefix}.w_ih"),
        Tensor(w_hh, requires_grad=True, name=f"{prefix}.w_hh"),
        Tensor(bias, requires_grad=True, name=f"{prefix}.bias"),
    )


class RateAdapter:
    """Parâmetros ψ: pilhas de células do encoder e do decoder (oculto = d) e projeção linear oculto→d."""

    def __init__(self, encoder_cells: List[LstmCell], decoder_cells: List[LstmCell], out_weight: Tensor, out_bias: Tensor):
        if len(encoder_cells) != len(decoder_cells) or not encoder_cells:
            raise ShapeError("Encoder e decoder precisam do mesmo número (≥ 1) de camadas")
        dim = out_weight.shape[1]
        for cell in list(encoder_cells) + list(decoder_cells):
            if cell.w_ih.shape != (dim, 4 * dim) or cell.w_hh.shape != (dim, 4 * dim):
                raise ShapeError(f"Célula com forma {cell.w_ih.shape} incompatível com d={dim}")
        self.encoder_cells = encoder_cells
        self.decoder_cells = decoder_cells
        self.out_weight = out_weight
        self.out_bias = out_bias

    @classmethod
    def initialize(
        cls,
        dim: int,
        num_layers: int = SEQ2SEQ_LAYERS,
        rng: Optional[np.random.Generator] = None,
    ) -> "RateAdapter":
        """Pesos uniformes em ±1/√d e viés da porta de esquecimento = 1; sem `rng`, tudo zero."""
        enc = [_init_cell(dim, rng, f"adapter.enc{l}") for l in range(num_layers)]
        dec = [_init_cell(dim, rng, f"adapter.dec{l}") for l in range(num_layers)]
        if rng is None:
            w = np.zeros((dim, dim))
        else:
            bound = 1.0 / math.sqrt(dim)
            w = rng.uniform(-bound, bound, size=(dim, dim))
        return cls(
            enc,
            dec,
            Tensor(w, requires_grad=True, name="adapter.out.weight"),
            Tensor(np.zeros(dim), requires_grad=True, name="adapter.out.bias"),
        )

    @property
    def num_layers(self) -> int:
        return len(self.encoder_cells)

    @property
    def dim(self) -> int:
        return self.out_weight.shape[1]

    def parameters(self) -> List[Tensor]:
        """Ordem fixa, a mesma do formato RQS2."""
        params: List[Tensor] = []
        for cell in self.encoder_cells:
            params.extend(cell.parameters())
        for cell in self.decoder_cells:
            params.extend(cell.parameters())
        params.extend([self.out_weight, self.out_bias])
        return params

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def project(self, h: Tensor) -> Tensor:
        """Incremento somado à entrada do passo; com ψ zerado a saída repete a entrada."""
        return ops.row_bias(ops.matmul(h, self.out_weight), self.out_bias)


# ----------------------------------------------------------------------
# Cronograma de cross-forcing
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class ScheduleStep:
    """Fonte da entrada do decoder num passo: `original` (e_j) ou `generated` (ẽ_j), índice 1-based."""

    source: str
    index: int

    def label(self) -> str:
        return f"e_{self.index}" if self.source == "original" else f"ẽ_{self.index}"


@dataclass(frozen=True)
class AdaptSchedule:
    target_size: int
    steps: Tuple[ScheduleStep, ...]

    def labels(self) -> List[str]:
        return [s.label() for s in self.steps]


def build_schedule(size: int, target_size: int, cross_forcing: bool = True) -> AdaptSchedule:
    """Passo i: Original((i+1)/2) se i ímpar e i ≤ 2K, senão Generated(i−1).

    Sem cross-forcing (variante de ablação): Original(i) para i ≤ K, depois Generated(i−1).
    """
    if size < 1 or target_size < 1:
        raise ConfigError(f"Tamanhos devem ser positivos: K={size}, K̃={target_size}")
    steps = []
    for i in range(1, target_size + 1):
        if cross_forcing:
            if i % 2 == 1 and i <= 2 * size:
                steps.append(ScheduleStep("original", (i + 1) // 2))
            else:
                steps.append(ScheduleStep("generated", i - 1))
        elif i <= size:
            steps.append(ScheduleStep("original", i))
        else:
            steps.append(ScheduleStep("generated", i - 1))
    return AdaptSchedule(target_size=target_size, steps=tuple(steps))


# ----------------------------------------------------------------------
# Codificação e geração
# ----------------------------------------------------------------------
def _zero_state(adapter: RateAdapter, dtype) -> State:
    zeros = [Tensor(np.zeros((1, adapter.dim)), dtype=dtype) for _ in range(adapter.num_layers)]
    return list(zeros), [Tensor(np.zeros((1, adapter.dim)), dtype=dtype) for _ in range(adapter.num_layers)]


def _run_stack(cells: Sequence[LstmCell], x: Tensor, h: List[Tensor], c: List[Tensor]) -> Tensor:
    for layer, cell in enumerate(cells):
        h[layer], c[layer] = cell.step(x, h[layer], c[layer])
        x = h[layer]
    return x


def encode_codebook(codebook: Codebook, adapter: RateAdapter) -> State:
    """Consome e_1..e_K em ordem e devolve (h, c) finais de cada camada."""
    if codebook.dim != adapter.dim:
        raise ShapeError(f"Codebook d={codebook.dim} incompatível com adaptador d={adapter.dim}")
    h, c = _zero_state(adapter, codebook.vectors.dtype)
    for j in range(codebook.size):
        _run_stack(adapter.encoder_cells, codebook.vectors[j:j + 1, :], h, c)
    return h, c


def generate_codebook(
    codebook: Codebook,
    target_size: int,
    adapter: RateAdapter,
    cross_forcing: bool = True,
) -> Codebook:
    """Gera ẽ (K̃×d) de forma determinística, ligado ao grafo de ψ e de e."""
    if target_size < 1:
        raise ConfigError(f"K̃ deve ser positivo, recebido {target_size}")
    if target_size > 4 * codebook.size:
        raise ConfigError(f"K̃={target_size} acima do limite de geração 4K={4 * codebook.size}")
    h, c = encode_codebook(codebook, adapter)
    schedule = build_schedule(codebook.size, target_size, cross_forcing=cross_forcing)
    outputs: List[Tensor] = []
    for step in schedule.steps:
        if step.source == "original":
            x = codebook.vectors[step.index - 1:step.index, :]
        else:
            x = outputs[step.index - 1]
        top = _run_stack(adapter.decoder_cells, x, h, c)
        outputs.append(ops.add(x, adapter.project(top)))
    return Codebook(ops.concat(outputs, axis=0), update_mode="gradient")


def raq_loss(x: Tensor, x_hat_tilde: Tensor, z_e: Tensor, z_q_tilde: Tensor, beta: float = BETA_COMMIT) -> VqLoss:
    """Mesma estrutura da perda VQ, com z_q(x|G_ψ(e)); o termo embed chega a ψ e a e pelos vetores selecionados."""
    return vq_loss(x, x_hat_tilde, z_e, z_q_tilde, beta)


def sample_target_size(rng: np.random.Generator, k_min: int, k_max: int) -> int:
    """K̃ log-uniforme em [k_min, k_max]."""
    if not 1 <= k_min <= k_max:
        raise ConfigError(f"Intervalo inválido para K̃: [{k_min}, {k_max}]")
    if k_min == k_max:
        return int(k_min)
    u = rng.uniform(math.log(k_min), math.log(k_max + 1))
    return int(min(k_max, max(k_min, math.floor(math.exp(u)))))


# ----------------------------------------------------------------------
# Passo de treino
# ----------------------------------------------------------------------
@dataclass
class StepMetrics:
    k_tilde: int
    loss_vq: float
    loss_raq: float
    recon_vq: float
    recon_raq: float
    perplexity_vq: float
    perplexity_raq: float

    def as_row(self, step: int) -> dict:
        return {"step": step, **self.__dict__}


def training_size_range(config: "ExperimentConfig") -> Tuple[int, int]:
    """Intervalo efetivo de K̃ no treino: limitado a 2K."""
    k_max = min(config.k_max, 2 * config.codebook_size)
    return min(config.k_min, k_max), k_max


def train_step(
    x: np.ndarray,
    model: "ToyVqModel",
    config: "ExperimentConfig",
    optimizer: AdamW,
    rng: np.random.Generator,
) -> StepMetrics:
    """Um lote: quantiza com e, gera ẽ = G_ψ(e), quantiza com ẽ, decodifica ambos,
    aplica Update(L_VQ) em {φ, θ, e} e depois Update(L_RAQ) em {φ, θ, ψ, e}.

    Em modo EMA, e pertence só a `ema_update`: nenhum dos dois gradientes o altera.
    """
    codebook = model.codebook
    batch = Tensor(x.reshape(x.shape[0], 1, x.shape[-2], x.shape[-1]))
    k_tilde = codebook.size
    if model.adapter is not None:
        k_tilde = sample_target_size(rng, *training_size_range(config))
    try:
        z_e = model.encode(batch)
        result = quantize(z_e, codebook)
        x_hat = model.decode(straight_through(z_e, result.quantized))
        loss_vq = vq_loss(batch, x_hat, z_e, result.quantized, config.beta)

        loss_raq: Optional[VqLoss] = None
        result_t = result
        if model.adapter is not None:
            adapted = generate_codebook(codebook, k_tilde, model.adapter, cross_forcing=config.cross_forcing)
            result_t = quantize(z_e, adapted)
            x_hat_t = model.decode(straight_through(z_e, result_t.quantized))
            loss_raq = raq_loss(batch, x_hat_t, z_e, result_t.quantized, config.beta)

        enc_dec = model.encoder_decoder_parameters()
        all_params = model.parameters()
        gradient_codebook = [codebook.vectors] if codebook.update_mode == "gradient" else []

        zero_grad(all_params)
        backward(loss_vq.total)
        optimizer.step(enc_dec + gradient_codebook)
        if codebook.update_mode == "ema":
            ema_update(codebook, result, z_e, config.gamma)

        if loss_raq is not None:
            zero_grad(all_params)
            backward(loss_raq.total)
            optimizer.step(enc_dec + model.adapter.parameters() + gradient_codebook)
        zero_grad(all_params)
    except NonFiniteError as exc:
        raise TrainingDivergedError(
            f"Perda não finita (K={codebook.size}, K̃={k_tilde}, lote {tuple(batch.shape)}): {exc}"
        ) from exc

    vq_values = loss_vq.values()
    raq_values = loss_raq.values() if loss_raq is not None else vq_values
    return StepMetrics(
        k_tilde=k_tilde,
        loss_vq=vq_values["total"],
        loss_raq=raq_values["total"],
        recon_vq=vq_values["recon"],
        recon_raq=raq_values["recon"],
        perplexity_vq=perplexity(result.usage_counts),
        perplexity_raq=perplexity(result_t.usage_counts),
    )


# ----------------------------------------------------------------------
# Formato RQS2
# ----------------------------------------------------------------------
def adapter_to_bytes(adapter: RateAdapter) -> bytes:
    """magic "RQS2", u16 versão, u32 camadas, u32 d e os blocos f32 LE na ordem de `parameters()`:
    para cada camada do encoder e depois do decoder: w_ih [d×4d], w_hh [d×4d], bias [4d];
    por fim out.weight [d×d] e out.bias [d].
    """
    parts = [ADAPTER_MAGIC, struct.pack("<HII", ADAPTER_VERSION, adapter.num_layers, adapter.dim)]
    parts.extend(f32_bytes(p.data) for p in adapter.parameters())
    return b"".join(parts)


def adapter_from_bytes(payload: bytes, source: str = "<bytes>") -> RateAdapter:
    reader = ByteReader(payload, source)
    reader.expect_magic(ADAPTER_MAGIC)
    version, num_layers, dim = reader.unpack("<HII")
    if version != ADAPTER_VERSION:
        raise CodebookFormatError(f"Versão RQS2 não suportada em {source}: {version}")
    if num_layers < 1 or dim < 1:
        raise CodebookFormatError(f"Dimensões inválidas em {source}: camadas={num_layers}, d={dim}")
    adapter = RateAdapter.initialize(dim, num_layers, rng=None)
    for p in adapter.parameters():
        p.data = reader.f32_array(p.size, p.shape)
    if reader.remaining():
        raise CodebookFormatError(f"{reader.remaining()} bytes sobrando no fim de {source}")
    return adapter


def save_adapter(adapter: RateAdapter, path: Union[str, Path]) -> None:
    Path(path).write_bytes(adapter_to_bytes(adapter))


def load_adapter(path: Union[str, Path]) -> RateAdapter:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Adaptador não encontrado: {path}")
    return adapter_from_bytes(path.read_bytes(), source=str(path))
