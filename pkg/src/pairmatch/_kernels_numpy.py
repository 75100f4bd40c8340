"""Pure-numpy implementations of the hot kernels.

This is the fallback path used when numba is unavailable or when
``PAIRMATCH_BACKEND=numpy`` is set.  Function signatures mirror
``_kernels_numba`` exactly; both are exercised by the parity tests.

Convention for conv1d: same-padding cross-correlation with the window for
output position t covering input positions [t - left, t - left + k) where
left = (k - 1) // 2.  Positions outside the sequence contribute zero.
"""

import numpy as np


def conv1d_same_forward(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """x: (B, S, Din), w: (k, Din, Dout) -> (B, S, Dout)."""
    batch, seq, _ = x.shape
    k, _, d_out = w.shape
    left = (k - 1) // 2
    xpad = np.zeros((batch, seq + k - 1, x.shape[2]), dtype=x.dtype)
    xpad[:, left:left + seq] = x
    y = np.zeros((batch, seq, d_out), dtype=x.dtype)
    for j in range(k):
        y += xpad[:, j:j + seq] @ w[j]
    return y


def conv1d_same_backward(x: np.ndarray, w: np.ndarray, gy: np.ndarray):
    """Gradients of conv1d_same_forward. Returns (gx, gw)."""
    batch, seq, d_in = x.shape
    k, _, d_out = w.shape
    left = (k - 1) // 2
    xpad = np.zeros((batch, seq + k - 1, d_in), dtype=x.dtype)
    xpad[:, left:left + seq] = x
    gxpad = np.zeros_like(xpad)
    gw = np.zeros_like(w)
    for j in range(k):
        gxpad[:, j:j + seq] += gy @ w[j].T
        gw[j] = np.einsum("bsi,bso->io", xpad[:, j:j + seq], gy)
    return gxpad[:, left:left + seq].copy(), gw


def masked_max_forward(x: np.ndarray, valid: np.ndarray):
    """Max over axis 1 restricted to valid positions.

    x: (B, S, D), valid: (B, S) bool with >= 1 True per row.
    Returns (out (B, D), argmax (B, D) int64).
    """
    neg = np.where(valid[:, :, None], x, -np.inf)
    arg = np.argmax(neg, axis=1)
    out = np.take_along_axis(neg, arg[:, None, :], axis=1)[:, 0, :]
    return out, arg.astype(np.int64)


def masked_max_backward(arg: np.ndarray, gy: np.ndarray, seq: int) -> np.ndarray:
    batch, d = gy.shape
    gx = np.zeros((batch, seq, d), dtype=gy.dtype)
    b_idx = np.arange(batch)[:, None]
    d_idx = np.arange(d)[None, :]
    np.add.at(gx, (b_idx, arg, d_idx), gy)
    return gx


def masked_avg_forward(x: np.ndarray, valid: np.ndarray) -> np.ndarray:
    # summing over the compressed valid rows keeps the accumulation tree
    # independent of trailing padding, so padded inputs are bit-identical
    batch = x.shape[0]
    out = np.empty((batch, x.shape[2]), dtype=x.dtype)
    for b in range(batch):
        rows = x[b, valid[b]]
        out[b] = rows.sum(axis=0) / rows.shape[0]
    return out


def masked_avg_backward(valid: np.ndarray, gy: np.ndarray) -> np.ndarray:
    counts = valid.sum(axis=1).astype(gy.dtype)
    gx = (gy / counts[:, None])[:, None, :] * valid[:, :, None]
    return gx


def adam_update(p, g, m, v, t, lr, beta1, beta2, eps):
    """One in-place Adam step on flat float64 arrays."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    mhat = m / (1.0 - beta1 ** t)
    vhat = v / (1.0 - beta2 ** t)
    p -= lr * mhat / (np.sqrt(vhat) + eps)
