"""
Quantizadores: VQ base, adaptador Seq2Seq e adaptação baseada em modelo.
"""
