"""
Pacote de quantização com taxa adaptável (RAQ) para modelos VQ.
Contém o motor de diferenciação automática, o quantizador vetorial, os
adaptadores de codebook (Seq2Seq e baseados em modelo) e o harness de
treino e avaliação.

Módulos principais:
- raq_cli: Interface de linha de comando (train, adapt, eval, gen-data, inspect-codebook)
- processar_simples: Treino + avaliação com a configuração padrão
- autodiff: Tensores com diferenciação automática em modo reverso
- vq_core: Codebook, quantização, perda VQ, EMA e formato RQCB
- seq2seq: Adaptador de taxa recorrente, cross-forcing e formato RQS2
- model_based: DKM, IKM/MMD, k-means de Lloyd
- metrics: MSE, PSNR, SSIM, perplexidade
- toy_model: Encoder/decoder convolucional de brinquedo

Formas de execução:
1. Ultra simples: python -m raq.executors.processar_simples [passos]
2. Completa: python -m raq.executors.raq_cli train --output runs/exp
"""
__version__ = "1.0.0"
__description__ = "Quantização com taxa adaptável: codebooks de tamanho variável a partir de um único modelo VQ"

# Imports principais para facilitar uso
from .executors.raq_cli import main
from .quantizers.vq_core import Codebook, quantize
from .quantizers.seq2seq import RateAdapter, generate_codebook
from .quantizers.model_based import dkm_reduce, ikm_increase
from .config import ExperimentConfig

__all__ = [
    'main',
    'Codebook',
    'quantize',
    'RateAdapter',
    'generate_codebook',
    'dkm_reduce',
    'ikm_increase',
    'ExperimentConfig',
]
