"""
Utilitários: constantes, exceções, logs e leitura binária.
"""
