"""
Executores: linha de comando, treino, adaptação, avaliação e relatórios.
"""
