"""Desk-scale trainable sentence-pair matcher.

Global transformer encoding with learned layer mixing, a multi-kernel CNN
local encoder, a same-relation auxiliary classifier, and a triplet-distance
objective, all on a small float64 autodiff engine with numba-accelerated
kernels (numpy fallback via PAIRMATCH_BACKEND=numpy).
"""

__version__ = "0.1.0"
