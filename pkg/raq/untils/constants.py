"""
Constantes e hiperparâmetros utilizados no treino e na adaptação de codebooks.
"""

# Hiperparâmetros de referência (tabela de arquitetura/hiperparâmetros do RAQ)
BETA_COMMIT = 0.25
GAMMA_EMA = 0.99
LEARNING_RATE = 0.0005
ADAMW_BETAS = (0.9, 0.999)
ADAMW_EPS = 1e-8
WEIGHT_DECAY = 1e-4
SEQ2SEQ_LAYERS = 2

# Tamanhos de codebook sorteados durante o treino
K_MIN = 8
K_MAX = 1024

# RAQ baseado em modelo (DKM/IKM)
DKM_TAU = 0.01
DKM_MAX_ITERS = 200
DKM_EPS = 1e-6
IKM_MAX_ITERS = 5000
IKM_LAMBDA = 1e-4
IKM_ETA = 0.1
IKM_DKM_ITERS = 3
IKM_PLATEAU_WINDOW = 100
IKM_PLATEAU_TOL = 1e-7

# Piso das contagens EMA (códigos nunca usados)
EMA_EPS = 1e-5

# Termo que mantém um centróide sem massa no lugar durante o DKM
DKM_EMPTY_MASS = 1e-8

# Métricas
PSNR_CAP_DB = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

# Formatos binários
CODEBOOK_MAGIC = b"RQCB"
CODEBOOK_VERSION = 1
ADAPTER_MAGIC = b"RQS2"
ADAPTER_VERSION = 1
IDX_U8_3D_MAGIC = b"\x00\x00\x08\x03"

# Relatório de avaliação: ordem exata das colunas do CSV
REPORT_COLUMNS = ["k_tilde", "method", "mse", "psnr", "ssim", "perplexity", "usage", "seed"]

# Colunas do log de treino
TRAIN_LOG_COLUMNS = [
    "step",
    "k_tilde",
    "loss_vq",
    "loss_raq",
    "recon_vq",
    "recon_raq",
    "perplexity_vq",
    "perplexity_raq",
]

# Métodos de adaptação aceitos
ADAPT_METHODS = ("seq2seq", "dkm", "ikm", "random_subset")
EVAL_METHODS = ("baseline", "seq2seq", "dkm", "ikm", "random_subset", "model_based")

# Nomes dos arquivos de um checkpoint
MODEL_FILE = "model.npz"
CODEBOOK_FILE = "codebook.rqcb"
ADAPTER_FILE = "adapter.rqs2"
MANIFEST_FILE = "manifest.txt"
CONFIG_FILE = "config.txt"
TRAIN_LOG_FILE = "training_log.csv"

# Variável de ambiente que sobrescreve a semente da configuração
SEED_ENV_VAR = "RAQ_SEED"
