"""
Sparse recovery algorithms: CPA (batch, regularized, iterative) and MMV baselines
"""
