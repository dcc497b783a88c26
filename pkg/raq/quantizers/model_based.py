"""
RAQ baseado em modelo: adaptação de um codebook pré-treinado sem treino adicional.

- `dkm_reduce`: k-means diferenciável (atenção softmax com temperatura) para K̃ < K
- `ikm_increase`: otimização de um codebook maior cujo agrupamento DKM se
  aproxima de e sob MMD, para K̃ > K
- `kmeans_lloyd`: k-means clássico, usado como referência
- `random_subset`: seleção aleatória de K̃ vetores de e (linha de base)
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist, pdist

from ..autodiff import ops
from ..autodiff.optim import sgd_step, zero_grad
from ..autodiff.tensor import Tensor, backward, default_dtype, enable_grad, no_grad
from ..untils.constants import (
    DKM_EMPTY_MASS,
    DKM_EPS,
    DKM_MAX_ITERS,
    DKM_TAU,
    IKM_DKM_ITERS,
    IKM_ETA,
    IKM_LAMBDA,
    IKM_MAX_ITERS,
    IKM_PLATEAU_TOL,
    IKM_PLATEAU_WINDOW,
)
from ..untils.errors import ConfigError, NonFiniteError, ShapeError, TrainingDivergedError
from .vq_core import Codebook

logger = logging.getLogger(__name__)

INIT_METHODS = ("kmeanspp", "random")

ArrayLike = Union[np.ndarray, Tensor]


def _as_points(points: Union[ArrayLike, Codebook]) -> np.ndarray:
    if isinstance(points, Codebook):
        points = points.vectors
    if isinstance(points, Tensor):
        points = points.data
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ShapeError(f"Esperada matriz n×d, recebido {points.shape}")
    return points


# ----------------------------------------------------------------------
# k-means clássico
# ----------------------------------------------------------------------
def kmeans_plusplus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Sorteio D²: primeiro centróide uniforme, os demais com probabilidade ∝ distância² ao mais próximo."""
    points = _as_points(points)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"k-means++ exige 1 ≤ k ≤ {n}, recebido {k}")
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    centroids[0] = points[rng.integers(0, n)]
    closest = cdist(points, centroids[:1], "sqeuclidean").min(axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total <= 0:
            # pontos restantes coincidem com centróides já escolhidos
            idx = rng.integers(0, n)
        else:
            idx = rng.choice(n, p=closest / total)
        centroids[i] = points[idx]
        closest = np.minimum(closest, cdist(points, centroids[i:i + 1], "sqeuclidean")[:, 0])
    return centroids


def initial_centroids(points: np.ndarray, k: int, rng: np.random.Generator, init: str = "kmeanspp") -> np.ndarray:
    if init == "kmeanspp":
        return kmeans_plusplus_init(points, k, rng)
    if init == "random":
        points = _as_points(points)
        if not 1 <= k <= points.shape[0]:
            raise ConfigError(f"Inicialização aleatória exige 1 ≤ k ≤ {points.shape[0]}, recebido {k}")
        return points[rng.choice(points.shape[0], size=k, replace=False)].copy()
    raise ConfigError(f"Inicialização desconhecida: {init} (opções: {', '.join(INIT_METHODS)})")


@dataclass
class KMeansResult:
    centroids: np.ndarray
    assignment: np.ndarray
    objective_history: List[float] = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.objective_history[-1]

    @property
    def iterations(self) -> int:
        return len(self.objective_history)


def kmeans_objective(points: np.ndarray, centroids: np.ndarray, assignment: np.ndarray) -> float:
    """Soma das distâncias quadradas de cada ponto ao centróide atribuído."""
    return float(((points - centroids[assignment]) ** 2).sum())


def kmeans_lloyd(
    points: ArrayLike,
    k: int,
    init: str = "kmeanspp",
    max_iters: int = 300,
    seed: int = 0,
    init_centroids: Optional[np.ndarray] = None,
) -> KMeansResult:
    """Alterna atribuição e média até a atribuição estabilizar; clusters vazios mantêm o centróide."""
    points = _as_points(points)
    if k > points.shape[0]:
        raise ConfigError(f"K̃={k} maior que o número de pontos ({points.shape[0]})")
    if init_centroids is None:
        centroids = initial_centroids(points, k, np.random.default_rng(seed), init)
    else:
        centroids = np.array(init_centroids, dtype=np.float64)
        if centroids.shape != (k, points.shape[1]):
            raise ShapeError(f"Centróides iniciais {centroids.shape}, esperado {(k, points.shape[1])}")

    assignment = None
    history: List[float] = []
    for _ in range(max_iters):
        new_assignment = cdist(points, centroids, "sqeuclidean").argmin(axis=1)
        history.append(kmeans_objective(points, centroids, new_assignment))
        if assignment is not None and np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        for j in range(k):
            members = assignment == j
            if members.any():
                centroids[j] = points[members].mean(axis=0)
    assignment = cdist(points, centroids, "sqeuclidean").argmin(axis=1)
    final = kmeans_objective(points, centroids, assignment)
    if not history or final != history[-1]:
        history.append(final)
    return KMeansResult(centroids=centroids, assignment=assignment, objective_history=history)


# ----------------------------------------------------------------------
# DKM
# ----------------------------------------------------------------------
@dataclass
class DkmState:
    """Estado da última iteração: centróides C [K̃×d], atenção A [K×K̃], D = −f(e_i, c_j) [K×K̃]."""

    centroids: np.ndarray
    attention: np.ndarray
    distances: np.ndarray
    temperature: float
    iterations: int = 0
    converged: bool = False


def _validate_tau(tau: float) -> None:
    if not tau > 0:
        raise ConfigError(f"Temperatura τ deve ser > 0, recebido {tau}")


def dkm_cluster(
    points: ArrayLike,
    init: ArrayLike,
    tau: float = DKM_TAU,
    max_iters: int = DKM_MAX_ITERS,
    eps: float = DKM_EPS,
) -> Tuple[Tensor, DkmState]:
    """Itera distâncias → atenção softmax(D/τ) → centróides candidatos até ‖C − C̃‖ ≤ eps.

    Opera com `Tensor`: quando `points` exige gradiente e o grafo está ativo, os
    centróides devolvidos ficam ligados a `points` através de A e de C.
    """
    _validate_tau(tau)
    p = points if isinstance(points, Tensor) else Tensor(np.asarray(points))
    c = init.detach() if isinstance(init, Tensor) else Tensor(np.asarray(init), dtype=p.dtype)
    if p.ndim != 2 or c.ndim != 2 or p.shape[1] != c.shape[1]:
        raise ShapeError(f"dkm_cluster: pontos {p.shape} e centróides {c.shape}")
    dim = p.shape[1]
    k = c.shape[0]
    state = None
    for iteration in range(1, max_iters + 1):
        dist = ops.neg(ops.pairwise_sq_dists(p, c))
        attention = ops.softmax(ops.mul(dist, 1.0 / tau), axis=1)
        mass = ops.reshape(ops.add(ops.sum_(attention, axis=0), DKM_EMPTY_MASS), (k, 1))
        weighted = ops.add(ops.matmul(ops.permute(attention, (1, 0)), p), ops.mul(c, DKM_EMPTY_MASS))
        candidate = ops.div(weighted, ops.expand(mass, (k, dim)))
        shift = float(np.linalg.norm(candidate.data.astype(np.float64) - c.data))
        state = DkmState(
            centroids=candidate.data.astype(np.float64),
            attention=attention.data.astype(np.float64),
            distances=dist.data.astype(np.float64),
            temperature=tau,
            iterations=iteration,
            converged=shift <= eps,
        )
        c = candidate
        if state.converged:
            break
    return c, state


def _hard_means(points: np.ndarray, labels: np.ndarray, previous: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Médias por cluster; cluster sem membros mantém a linha de `previous`."""
    k = previous.shape[0]
    counts = np.bincount(labels, minlength=k)
    sums = np.zeros((k, points.shape[1]))
    np.add.at(sums, labels, points)
    means = np.array(previous, dtype=np.float64)
    filled = counts > 0
    means[filled] = sums[filled] / counts[filled, None]
    return means, counts


def _reseed_empty(points: np.ndarray, centroids: np.ndarray, labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Reposiciona cada centróide vazio no ponto mais distante de seu centróide entre os clusters com ≥ 2 membros.

    Sem doador (pontos repetidos), o centróide fica sobre o ponto escolhido mesmo que continue vazio.
    """
    k = centroids.shape[0]
    for j in np.flatnonzero(np.bincount(labels, minlength=k) == 0):
        counts = np.bincount(labels, minlength=k)
        if counts[j] > 0:
            continue
        dists = ((points - centroids[labels]) ** 2).sum(axis=1)
        dists[counts[labels] < 2] = -1.0
        donor = int(np.argmax(dists))
        logger.debug("Cluster %d vazio: reposicionado no ponto %d", j, donor)
        centroids[j] = points[donor]
        # uma passada de refinamento
        labels = cdist(points, centroids, "sqeuclidean").argmin(axis=1)
        centroids, _ = _hard_means(points, labels, centroids)
    return labels, centroids


def dkm_reduce(
    codebook: Codebook,
    target_size: int,
    tau: float = DKM_TAU,
    max_iters: int = DKM_MAX_ITERS,
    eps: float = DKM_EPS,
    init: str = "kmeanspp",
    seed: int = 0,
) -> Codebook:
    """Reduz e (K) para ẽ (K̃ < K): DKM até convergir, atribuição dura pelo argmax da
    atenção e ẽ_j = média dos e_i atribuídos a j."""
    if not 1 <= target_size < codebook.size:
        raise ConfigError(f"dkm exige 1 ≤ K̃ < K; recebido K̃={target_size}, K={codebook.size}")
    _validate_tau(tau)
    points = _as_points(codebook)
    start = initial_centroids(points, target_size, np.random.default_rng(seed), init)
    with default_dtype(np.float64), no_grad():
        _, state = dkm_cluster(points, start, tau=tau, max_iters=max_iters, eps=eps)
    if not state.converged:
        logger.debug("DKM sem convergência após %d iterações (K̃=%d)", state.iterations, target_size)
    labels = state.attention.argmax(axis=1)
    centroids, counts = _hard_means(points, labels, state.centroids)
    if np.any(counts == 0):
        labels, centroids = _reseed_empty(points, centroids, labels)
    return Codebook.from_array(centroids.astype(codebook.vectors.dtype))


def random_subset(codebook: Codebook, target_size: int, seed: int = 0) -> Codebook:
    """K̃ ≤ K vetores de e escolhidos sem reposição."""
    if not 1 <= target_size <= codebook.size:
        raise ConfigError(f"random_subset exige 1 ≤ K̃ ≤ K; recebido K̃={target_size}, K={codebook.size}")
    rows = np.random.default_rng(seed).permutation(codebook.size)[:target_size]
    return Codebook.from_array(codebook.numpy()[rows].copy())


# ----------------------------------------------------------------------
# MMD
# ----------------------------------------------------------------------
@dataclass
class MmdConfig:
    """Kernel RBF gaussiano; `bandwidth=None` ativa a heurística da mediana."""

    kernel: str = "gaussian_rbf"
    bandwidth: Optional[float] = None
    lam: float = IKM_LAMBDA
    eta: float = IKM_ETA
    max_iters: int = IKM_MAX_ITERS
    dkm_iters: int = IKM_DKM_ITERS
    plateau_window: int = IKM_PLATEAU_WINDOW
    plateau_tol: float = IKM_PLATEAU_TOL

    def __post_init__(self):
        if self.kernel != "gaussian_rbf":
            raise ConfigError(f"Kernel não suportado: {self.kernel}")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ConfigError(f"Largura de banda deve ser > 0, recebido {self.bandwidth}")
        if self.lam < 0:
            raise ConfigError(f"λ deve ser ≥ 0, recebido {self.lam}")
        if not self.eta > 0:
            raise ConfigError(f"η deve ser > 0, recebido {self.eta}")
        if self.max_iters < 1 or self.dkm_iters < 1:
            raise ConfigError("max_iters e dkm_iters devem ser ≥ 1")


def median_bandwidth(points: np.ndarray) -> float:
    """h = sqrt(mediana(‖x − y‖²) / 2); cai para 1.0 quando a mediana é nula."""
    points = _as_points(points)
    if points.shape[0] < 2:
        return 1.0
    median = float(np.median(pdist(points, "sqeuclidean")))
    if not math.isfinite(median) or median <= 0:
        return 1.0
    return math.sqrt(median / 2.0)


def resolve_bandwidth(cfg: MmdConfig, x: np.ndarray, y: Optional[np.ndarray] = None) -> float:
    if cfg.bandwidth is not None:
        return float(cfg.bandwidth)
    pooled = _as_points(x) if y is None else np.vstack([_as_points(x), _as_points(y)])
    return median_bandwidth(pooled)


def rbf_kernel(x: np.ndarray, y: np.ndarray, bandwidth: float) -> np.ndarray:
    return np.exp(-cdist(x, y, "sqeuclidean") / (2.0 * bandwidth ** 2))


def _kernel_mean(x: np.ndarray, y: np.ndarray, bandwidth: float) -> float:
    return math.fsum(rbf_kernel(x, y, bandwidth).ravel()) / (x.shape[0] * y.shape[0])


def mmd_squared(x: ArrayLike, y: ArrayLike, cfg: Optional[MmdConfig] = None) -> float:
    """Estimador enviesado: média k(x,x') + média k(y,y') − 2·média k(x,y)."""
    cfg = cfg or MmdConfig()
    x = _as_points(x)
    y = _as_points(y)
    if x.shape[0] < 1 or y.shape[0] < 1:
        raise ShapeError("mmd_squared exige conjuntos não vazios")
    if x.shape[1] != y.shape[1]:
        raise ShapeError(f"mmd_squared: dimensões {x.shape[1]} e {y.shape[1]}")
    h = resolve_bandwidth(cfg, x, y)
    value = (_kernel_mean(x, x, h) + _kernel_mean(y, y, h)) - 2.0 * _kernel_mean(x, y, h)
    return max(value, 0.0) if value > -1e-9 else value


def mmd_squared_tensor(x: Tensor, y: np.ndarray, bandwidth: float) -> Tensor:
    """MMD² diferenciável em relação a x; y é fixo."""
    y_t = Tensor(y, dtype=x.dtype)
    scale = -1.0 / (2.0 * bandwidth ** 2)
    k_xx = ops.mean(ops.exp(ops.mul(ops.pairwise_sq_dists(x, x), scale)))
    k_xy = ops.mean(ops.exp(ops.mul(ops.pairwise_sq_dists(x, y_t), scale)))
    k_yy = _kernel_mean(_as_points(y), _as_points(y), bandwidth)
    return ops.add(ops.sub(k_xx, ops.mul(k_xy, 2.0)), k_yy)


# ----------------------------------------------------------------------
# IKM
# ----------------------------------------------------------------------
def _plateaued(history: List[float], window: int, tol: float) -> bool:
    if len(history) <= window:
        return False
    return history[-window - 1] - min(history[-window:]) < tol


def ikm_optimize(
    codebook: Codebook,
    target_size: int,
    cfg: Optional[MmdConfig] = None,
    tau: float = DKM_TAU,
    seed: int = 0,
) -> Tuple[np.ndarray, List[float]]:
    """Otimiza ẽ [K̃×d] minimizando L = MMD²(e, g_DKM(ẽ)) + λ‖ẽ‖² por SGD.

    g_DKM agrupa ẽ em K centros com `cfg.dkm_iters` iterações diferenciáveis,
    reaproveitando os centros da iteração anterior. Devolve ẽ e o histórico de L.
    """
    cfg = cfg or MmdConfig()
    _validate_tau(tau)
    if target_size <= codebook.size:
        raise ConfigError(f"ikm exige K̃ > K; recebido K̃={target_size}, K={codebook.size}")
    e = _as_points(codebook)
    size, dim = e.shape
    bandwidth = resolve_bandwidth(cfg, e)
    rng = np.random.default_rng(seed)
    history: List[float] = []
    with default_dtype(np.float64), enable_grad():
        candidate = Tensor(
            rng.normal(0.0, dim ** -0.25, size=(target_size, dim)),
            requires_grad=True,
            name="ikm.candidate",
        )
        centers = kmeans_plusplus_init(candidate.data, size, rng)
        logger.debug("IKM: K=%d → K̃=%d, d=%d, h=%.4g", size, target_size, dim, bandwidth)
        for iteration in range(cfg.max_iters):
            try:
                clustered, _ = dkm_cluster(candidate, centers, tau=tau, max_iters=cfg.dkm_iters, eps=0.0)
                loss = ops.add(
                    mmd_squared_tensor(clustered, e, bandwidth),
                    ops.mul(ops.sum_(ops.square(candidate)), cfg.lam),
                )
                zero_grad([candidate])
                backward(loss)
                sgd_step([candidate], cfg.eta)
            except NonFiniteError as exc:
                raise TrainingDivergedError(
                    f"IKM divergiu na iteração {iteration} (K={size}, K̃={target_size}, η={cfg.eta}): {exc}"
                ) from exc
            centers = clustered.data.copy()
            history.append(loss.item())
            if _plateaued(history, cfg.plateau_window, cfg.plateau_tol):
                logger.debug("IKM estabilizou na iteração %d (L=%.6g)", iteration, history[-1])
                break
    return candidate.data.copy(), history


def ikm_increase(
    codebook: Codebook,
    target_size: int,
    cfg: Optional[MmdConfig] = None,
    tau: float = DKM_TAU,
    seed: int = 0,
) -> Codebook:
    vectors, history = ikm_optimize(codebook, target_size, cfg=cfg, tau=tau, seed=seed)
    if history:
        logger.info("IKM K̃=%d: L inicial %.6g, final %.6g (%d iterações)", target_size, history[0], history[-1], len(history))
    return Codebook.from_array(vectors.astype(codebook.vectors.dtype))
