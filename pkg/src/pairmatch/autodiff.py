"""Dense float64 tensors with reverse-mode automatic differentiation.

Every model equation is composed from the operations in this module.  A
``Tensor`` wraps an ndarray; applying an operation records the parent
tensors and a gradient rule, forming a DAG.  ``backward`` walks that DAG
once in reverse topological order and accumulates gradients onto the
``requires_grad`` leaves (repeated calls accumulate; ``zero_grads`` resets).

Design notes:
  * float64 throughout -- the finite-difference tolerances that gate this
    package need the headroom.
  * relu's derivative at exactly 0 is defined as 0.
  * euclidean_distance carries a 1e-24 epsilon inside the square root so
    its gradient stays finite at distance 0; the value is unaffected
    beyond 1e-12.
  * conv1d and the masked pools route through ``backend`` (numba kernels
    with a numpy fallback); everything else is plain numpy.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from . import backend
from .errors import ContractError, DegenerateInputError, DimensionError

Array = np.ndarray

_DIST_EPS = 1e-24


class Tensor:
    """n-dimensional float64 value with an optional gradient and lineage.

    ``grad`` is populated on requires_grad leaves by ``backward`` and has
    the same shape as ``data``.  Tensors are immutable after construction
    except for ``grad`` (and in-place parameter updates by the optimizer,
    which happen outside any live graph).
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_grad_fn", "op", "meta")

    def __init__(self, data, requires_grad: bool = False):
        self.data: Array = np.asarray(data, dtype=np.float64)
        self.grad: Optional[Array] = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._grad_fn: Optional[Callable[[Array], Sequence[Optional[Array]]]] = None
        self.op = "leaf"
        self.meta: Optional[dict] = None  # per-op extras (e.g. pooling masks)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(op={self.op}, shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data: Array, parents: tuple[Tensor, ...], grad_fn, op: str) -> Tensor:
    """Wrap an op result; constant subgraphs are pruned from the tape."""
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._grad_fn = grad_fn
        out.op = op
    else:
        out.op = op
    return out


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    """Sum g down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise arithmetic

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data
    return _node(
        data,
        (a, b),
        lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)),
        "add",
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data - b.data
    return _node(
        data,
        (a, b),
        lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)),
        "sub",
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data
    return _node(
        data,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        ),
        "mul",
    )


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _node(-a.data, (a,), lambda g: (-g,), "neg")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _node(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def log(a: Tensor) -> Tensor:
    return _node(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def clamp_min(a: Tensor, floor: float) -> Tensor:
    """max(a, floor) elementwise; gradient passes only where a > floor."""
    mask = a.data > floor
    out = _node(np.where(mask, a.data, floor), (a,), lambda g: (g * mask,), "clamp_min")
    out.meta = {"floor": floor}
    return out


# ---------------------------------------------------------------------------
# linear algebra / reductions

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise DimensionError(
            f"matmul needs rank >= 2 operands, got {a.data.shape} @ {b.data.shape}"
        )
    if a.data.shape[-1] != b.data.shape[-2]:
        raise DimensionError(
            f"matmul inner dimensions disagree: {a.data.shape} @ {b.data.shape}"
        )
    data = a.data @ b.data

    def grad_fn(g: Array):
        ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape)
        gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape)
        return ga, gb

    return _node(data, (a, b), grad_fn, "matmul")


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def grad_fn(g: Array):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape).copy(),)

    return _node(data, (a,), grad_fn, "sum")


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.data.size if axis is None else a.data.shape[axis]
    data = a.data.mean(axis=axis, keepdims=keepdims)

    def grad_fn(g: Array):
        if axis is None:
            return (np.broadcast_to(g / count, a.data.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg / count, a.data.shape).copy(),)

    return _node(data, (a,), grad_fn, "mean")


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Stable softmax along ``axis`` (max-subtracted before exponentiation)."""
    if not -a.data.ndim <= axis < a.data.ndim:
        raise DimensionError(f"softmax axis {axis} out of range for shape {a.data.shape}")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def grad_fn(g: Array):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - dot),)

    return _node(out, (a,), grad_fn, "softmax")


def layer_norm(a: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance (no affine part)."""
    mu = a.data.mean(axis=-1, keepdims=True)
    centered = a.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std

    def grad_fn(g: Array):
        gm = g.mean(axis=-1, keepdims=True)
        gx = (g * xhat).mean(axis=-1, keepdims=True)
        return (inv_std * (g - gm - xhat * gx),)

    return _node(xhat, (a,), grad_fn, "layer_norm")


# ---------------------------------------------------------------------------
# shape manipulation

def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    orig = a.data.shape
    return _node(a.data.reshape(shape), (a,), lambda g: (g.reshape(orig),), "reshape")


def swapaxes(a: Tensor, ax1: int, ax2: int) -> Tensor:
    return _node(
        np.swapaxes(a.data, ax1, ax2),
        (a,),
        lambda g: (np.swapaxes(g, ax1, ax2),),
        "swapaxes",
    )


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def grad_fn(g: Array):
        return tuple(np.split(g, splits, axis=axis))

    return _node(data, tuple(tensors), grad_fn, "concat")


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    index = [slice(None)] * a.data.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    data = a.data[index]

    def grad_fn(g: Array):
        full = np.zeros_like(a.data)
        full[index] = g
        return (full,)

    return _node(data, (a,), grad_fn, "slice")


def embedding_lookup(table: Tensor, ids: Array) -> Tensor:
    """Rows of ``table`` selected by an integer array; out shape ids.shape + (d,)."""
    ids = np.asarray(ids)
    if ids.min(initial=0) < 0 or ids.max(initial=-1) >= table.data.shape[0]:
        raise ContractError(
            f"embedding ids out of range [0, {table.data.shape[0]}): "
            f"[{ids.min()}, {ids.max()}]"
        )
    data = table.data[ids]

    def grad_fn(g: Array):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, table.data.shape[1]))
        return (gt,)

    return _node(data, (table,), grad_fn, "embedding_lookup")


def take_rows(a: Tensor, idx: Array) -> Tensor:
    """Select whole rows of a 2-D tensor by index (gradient scatters back)."""
    idx = np.asarray(idx)
    if a.data.ndim != 2 or idx.ndim != 1:
        raise DimensionError(
            f"take_rows expects 2-D tensor and 1-D index, got {a.data.shape} / {idx.shape}"
        )
    return embedding_lookup(a, idx)


def gather_rows(a: Tensor, idx: Array) -> Tensor:
    """out[i] = a[i, idx[i]] for a 2-D tensor; used to pick P[y] per row."""
    idx = np.asarray(idx)
    n, c = a.data.shape
    if idx.shape != (n,):
        raise DimensionError(f"gather_rows index shape {idx.shape} != ({n},)")
    if idx.min() < 0 or idx.max() >= c:
        raise ContractError(f"gather_rows index out of range [0, {c})")
    rows = np.arange(n)
    data = a.data[rows, idx]

    def grad_fn(g: Array):
        ga = np.zeros_like(a.data)
        ga[rows, idx] = g
        return (ga,)

    return _node(data, (a,), grad_fn, "gather_rows")


# ---------------------------------------------------------------------------
# sequence kernels (backed by numba / numpy kernels)

def conv1d(x: Tensor, kernel: Tensor) -> Tensor:
    """Same-padded window-k cross-correlation over the sequence axis.

    x: (B, S, Din), kernel: (k, Din, Dout) -> (B, S, Dout).  Bias, when
    needed, is a separate ``add``.
    """
    if x.data.ndim != 3 or kernel.data.ndim != 3:
        raise DimensionError(
            f"conv1d expects (B,S,Din) and (k,Din,Dout), got {x.data.shape} and {kernel.data.shape}"
        )
    if x.data.shape[2] != kernel.data.shape[1]:
        raise DimensionError(
            f"conv1d channel mismatch: input {x.data.shape} vs kernel {kernel.data.shape}"
        )
    k = kernel.data.shape[0]
    seq = x.data.shape[1]
    if k < 1 or seq < 1 or k > seq + k - 1:
        raise DegenerateInputError(
            f"conv1d window {k} does not fit padded length {seq + k - 1}"
        )
    xd = np.ascontiguousarray(x.data)
    kd = np.ascontiguousarray(kernel.data)
    data = backend.conv1d_same_forward(xd, kd)

    def grad_fn(g: Array):
        gx, gw = backend.conv1d_same_backward(xd, kd, np.ascontiguousarray(g))
        return gx, gw

    return _node(data, (x, kernel), grad_fn, "conv1d")


def _check_pool_args(x: Tensor, valid: Array):
    if x.data.ndim != 3:
        raise DimensionError(f"masked pool expects (B,S,D), got {x.data.shape}")
    valid = np.asarray(valid, dtype=bool)
    if valid.shape != x.data.shape[:2]:
        raise DimensionError(
            f"validity mask shape {valid.shape} != sequence shape {x.data.shape[:2]}"
        )
    if not valid.any(axis=1).all():
        raise DegenerateInputError("masked pool: a row has no valid positions")
    return valid


def masked_max_pool(x: Tensor, valid: Array) -> Tensor:
    """Per-channel max over valid sequence positions. x: (B,S,D) -> (B,D)."""
    valid = _check_pool_args(x, valid)
    data, arg = backend.masked_max_forward(np.ascontiguousarray(x.data), valid)
    seq = x.data.shape[1]

    def grad_fn(g: Array):
        return (backend.masked_max_backward(arg, np.ascontiguousarray(g), seq),)

    out = _node(data, (x,), grad_fn, "masked_max_pool")
    out.meta = {"valid": valid}
    return out


def masked_avg_pool(x: Tensor, valid: Array) -> Tensor:
    """Per-channel mean over valid sequence positions. x: (B,S,D) -> (B,D)."""
    valid = _check_pool_args(x, valid)
    data = backend.masked_avg_forward(np.ascontiguousarray(x.data), valid)

    def grad_fn(g: Array):
        return (backend.masked_avg_backward(valid, np.ascontiguousarray(g)),)

    return _node(data, (x,), grad_fn, "masked_avg_pool")


def euclidean_distance(a: Tensor, b: Tensor) -> Tensor:
    """L2 distance over the last axis; gradient is safe at distance 0."""
    if a.data.shape != b.data.shape:
        raise DimensionError(
            f"euclidean_distance operands differ: {a.data.shape} vs {b.data.shape}"
        )
    diff = a.data - b.data
    dist = np.sqrt((diff * diff).sum(axis=-1) + _DIST_EPS)

    def grad_fn(g: Array):
        scale = (g / dist)[..., None]
        return scale * diff, -scale * diff

    return _node(dist, (a, b), grad_fn, "euclidean_distance")


# ---------------------------------------------------------------------------
# backward pass

def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen and parent.requires_grad:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every reachable requires_grad leaf.

    Each graph node is visited exactly once, in reverse topological order.
    Leaf gradients accumulate across calls until ``zero_grads``.
    """
    if loss.data.ndim != 0:
        raise ContractError(f"backward root must be scalar, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return
    order = _topo_order(loss)
    flowing: dict[int, Array] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = flowing.pop(id(node), None)
        if g is None:
            continue
        if node._grad_fn is None:
            if node.grad is None:
                node.grad = np.zeros_like(node.data)
            node.grad += g
            continue
        parts = node._grad_fn(g)
        for parent, pg in zip(node._parents, parts):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in flowing:
                flowing[key] = flowing[key] + pg
            else:
                flowing[key] = pg


def zero_grads(tensors) -> None:
    for t in tensors:
        t.grad = None
