"""
pmlbound
Context-aware leakage accounting for linear queries released by the Laplace mechanism
"""

__version__ = "0.1.0"
__description__ = "Pointwise maximal leakage bounds, noise calibration and exact certification for linear query workloads"
