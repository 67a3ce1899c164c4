"""Pure-numpy dilated conv1d kernels (fallback for the compiled core).

All kernels compute the left-anchored cross-correlation

    y[b, o, u] = sum_{c, k} w[o, c, k] * x[b, c, u + k * dilation]

with the index taken modulo L (circular) or treated as zero outside [0, L).
"""
import numpy as np


def _index(L, K, dilation):
    return np.arange(L)[None, :] + dilation * np.arange(K)[:, None]


def _im2col(x, K, dilation, circular):
    B, C, L = x.shape
    idx = _index(L, K, dilation)
    if circular:
        return x[:, :, idx % L]
    pad = max(0, (K - 1) * dilation)
    xp = np.concatenate([x, np.zeros((B, C, pad), dtype=x.dtype)], axis=2)
    return xp[:, :, idx]


def conv1d_forward(x, w, dilation, circular):
    B, C, L = x.shape
    O, _, K = w.shape
    cols = _im2col(x, K, dilation, circular).reshape(B, C * K, L)
    return np.matmul(w.reshape(O, C * K), cols)


def conv1d_backward(x, w, gy, dilation, circular):
    B, C, L = x.shape
    O, _, K = w.shape
    cols = _im2col(x, K, dilation, circular)
    gw = np.tensordot(gy, cols, axes=([0, 2], [0, 3]))
    gcols = np.matmul(w.reshape(O, C * K).T, gy).reshape(B, C, K, L)
    gx = np.zeros_like(x)
    for k in range(K):
        s = k * dilation
        if circular:
            gx += np.roll(gcols[:, :, k, :], s % L, axis=-1)
        elif s < L:
            gx[:, :, s:] += gcols[:, :, k, : L - s]
    return gx, gw.astype(w.dtype, copy=False)
