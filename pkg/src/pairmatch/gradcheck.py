"""Finite-difference verification of analytic gradients.

``grad_check`` reruns a deterministic scalar-valued function with each
parameter coordinate nudged by +/-eps and compares the central difference
(f(x+eps) - f(x-eps)) / 2eps against the gradient from ``backward``.

Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-6); the floor
keeps finite-difference roundoff from blowing up the ratio where the true
derivative vanishes.  Callers are responsible for probing away from
nondifferentiable points (relu kinks, pooling ties, the hinge boundary).
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .autodiff import Tensor, backward, zero_grads
from .errors import ContractError

_REL_FLOOR = 1e-6


def numerical_gradient(f: Callable[[], Tensor], param: Tensor, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar f() w.r.t. every coordinate of param."""
    if eps <= 0:
        raise ContractError(f"eps must be positive, got {eps}")
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + eps
        up = float(f().data)
        flat[i] = saved - eps
        down = float(f().data)
        flat[i] = saved
        gflat[i] = (up - down) / (2.0 * eps)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), _REL_FLOOR)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def grad_check(
    f: Callable[[], Tensor],
    params: Iterable[Tensor],
    eps: float = 1e-5,
) -> float:
    """Max relative error between analytic and numerical gradients.

    ``f`` must be deterministic and rebuild its graph on every call;
    ``params`` are the leaves to probe.
    """
    params = list(params)
    zero_grads(params)
    loss = f()
    backward(loss)
    worst = 0.0
    for p in params:
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        numeric = numerical_gradient(f, p, eps=eps)
        worst = max(worst, max_relative_error(analytic, numeric))
    return worst
