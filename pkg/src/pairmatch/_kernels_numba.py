"""Numba-jitted implementations of the hot kernels.

Same surface as ``_kernels_numpy``; selected by default when numba imports
cleanly (see ``backend``).  All kernels are nopython and cached, so the
compile cost is paid once per machine.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def conv1d_same_forward(x, w):
    batch, seq, d_in = x.shape
    k, _, d_out = w.shape
    left = (k - 1) // 2
    y = np.zeros((batch, seq, d_out), dtype=np.float64)
    for b in range(batch):
        for t in range(seq):
            for j in range(k):
                src = t + j - left
                if src < 0 or src >= seq:
                    continue
                for i in range(d_in):
                    xv = x[b, src, i]
                    for o in range(d_out):
                        y[b, t, o] += xv * w[j, i, o]
    return y


@njit(cache=True)
def conv1d_same_backward(x, w, gy):
    batch, seq, d_in = x.shape
    k, _, d_out = w.shape
    left = (k - 1) // 2
    gx = np.zeros((batch, seq, d_in), dtype=np.float64)
    gw = np.zeros((k, d_in, d_out), dtype=np.float64)
    for b in range(batch):
        for t in range(seq):
            for j in range(k):
                src = t + j - left
                if src < 0 or src >= seq:
                    continue
                for i in range(d_in):
                    acc = 0.0
                    xv = x[b, src, i]
                    for o in range(d_out):
                        go = gy[b, t, o]
                        acc += go * w[j, i, o]
                        gw[j, i, o] += xv * go
                    gx[b, src, i] += acc
    return gx, gw


@njit(cache=True)
def masked_max_forward(x, valid):
    batch, seq, d = x.shape
    out = np.empty((batch, d), dtype=np.float64)
    arg = np.zeros((batch, d), dtype=np.int64)
    for b in range(batch):
        for c in range(d):
            best = -np.inf
            best_t = 0
            for t in range(seq):
                if valid[b, t] and x[b, t, c] > best:
                    best = x[b, t, c]
                    best_t = t
            out[b, c] = best
            arg[b, c] = best_t
    return out, arg


@njit(cache=True)
def masked_max_backward(arg, gy, seq):
    batch, d = gy.shape
    gx = np.zeros((batch, seq, d), dtype=np.float64)
    for b in range(batch):
        for c in range(d):
            gx[b, arg[b, c], c] += gy[b, c]
    return gx


@njit(cache=True)
def masked_avg_forward(x, valid):
    batch, seq, d = x.shape
    out = np.zeros((batch, d), dtype=np.float64)
    for b in range(batch):
        n = 0
        for t in range(seq):
            if valid[b, t]:
                n += 1
                for c in range(d):
                    out[b, c] += x[b, t, c]
        for c in range(d):
            out[b, c] /= n
    return out


@njit(cache=True)
def masked_avg_backward(valid, gy):
    batch, d = gy.shape
    seq = valid.shape[1]
    gx = np.zeros((batch, seq, d), dtype=np.float64)
    for b in range(batch):
        n = 0
        for t in range(seq):
            if valid[b, t]:
                n += 1
        inv = 1.0 / n
        for t in range(seq):
            if valid[b, t]:
                for c in range(d):
                    gx[b, t, c] = gy[b, c] * inv
    return gx


@njit(cache=True)
def adam_update(p, g, m, v, t, lr, beta1, beta2, eps):
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for i in range(p.shape[0]):
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
        p[i] -= lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + eps)
