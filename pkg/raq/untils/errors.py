"""
Exceções do pacote. Os executores capturam `RaqError` e convertem em código de saída.
"""


class RaqError(Exception):
    """Base de todos os erros do pacote."""


class ShapeError(RaqError, ValueError):
    """Formas incompatíveis entre tensores, codebooks ou imagens."""


class NonFiniteError(RaqError, FloatingPointError):
    """Valor NaN/Inf produzido por uma operação."""


class MissingGradientError(RaqError, RuntimeError):
    """Otimizador chamado sem gradiente populado."""


class CodebookFormatError(RaqError, ValueError):
    """Arquivo binário (RQCB, RQS2, IDX) inválido ou truncado."""


class ConfigError(RaqError, ValueError):
    """Configuração inválida: chave desconhecida, valor fora do domínio ou combinação incompatível."""


class TrainingDivergedError(RaqError, RuntimeError):
    """Perda não finita durante o treino ou durante a otimização IKM."""
