"""
Fontes de dados: conjunto sintético e arquivos IDX.
"""
