"""Forward/backward passes for the CNN building blocks.

Feature maps are ``(N, C, H, W)`` float64.  Every ``*_forward`` returns
``(out, cache)`` and the matching ``*_backward`` takes ``(dout, cache)``.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv_forward(x, W, b, stride=1, padding=0):
    """Cross-correlation; ``W`` is ``(out, in, kh, kw)``."""
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    n, c, h, w = x.shape
    o, _, kh, kw = W.shape
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    oh, ow = win.shape[2], win.shape[3]
    # (N, OH, OW, C, kh, kw) -> rows of patches
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * kh * kw)
    out = cols @ W.reshape(o, -1).T + b
    out = out.reshape(n, oh, ow, o).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(out), (x.shape, cols, W, stride, padding, oh, ow)


def conv_backward(dout, cache):
    xshape, cols, W, stride, padding, oh, ow = cache
    n, c, h, w = xshape
    o, _, kh, kw = W.shape
    d = dout.transpose(0, 2, 3, 1).reshape(n * oh * ow, o)
    dW = (d.T @ cols).reshape(W.shape)
    db = d.sum(axis=0)
    dcols = (d @ W.reshape(o, -1)).reshape(n, oh, ow, c, kh, kw)
    dx = np.zeros(xshape)
    hs, ws = stride * (oh - 1) + 1, stride * (ow - 1) + 1
    for i in range(kh):
        for j in range(kw):
            dx[:, :, i:i + hs:stride, j:j + ws:stride] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    if padding:
        dx = dx[:, :, padding:-padding, padding:-padding]
    return dx, dW, db


def maxpool_forward(x, kernel=2, stride=2):
    n, c, h, w = x.shape
    win = sliding_window_view(x, (kernel, kernel), axis=(2, 3))[:, :, ::stride, ::stride]
    oh, ow = win.shape[2], win.shape[3]
    flat = win.reshape(n, c, oh, ow, kernel * kernel)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    return out, (x.shape, arg, kernel, stride)


def maxpool_backward(dout, cache):
    xshape, arg, k, s = cache
    dx = np.zeros(xshape)
    oh, ow = arg.shape[2], arg.shape[3]
    hs, ws = s * (oh - 1) + 1, s * (ow - 1) + 1
    for idx in range(k * k):
        i, j = divmod(idx, k)
        dx[:, :, i:i + hs:s, j:j + ws:s] += dout * (arg == idx)
    return dx


def relu_forward(x):
    return np.maximum(x, 0.0), x > 0


def relu_backward(dout, cache):
    return dout * cache


def fc_forward(x, W, b):
    """``W`` is ``(in, out)``; inputs are flattened per sample."""
    flat = x.reshape(x.shape[0], -1)
    return flat @ W + b, (x.shape, flat, W)


def fc_backward(dout, cache):
    xshape, flat, W = cache
    return (dout @ W.T).reshape(xshape), flat.T @ dout, dout.sum(axis=0)


def softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
