"""Slow, loop-based reference implementations used only by the tests.

Nothing here imports the package's numerical code; each oracle works from
the written definitions with plain Python loops.
"""

from __future__ import annotations

import math

import numpy as np


def gradient_oracle(img):
    """Per-pixel ``[+1 0 -1]`` cross-correlation with clamped (replicated) borders."""
    img = np.asarray(img, dtype=float)
    h, w = img.shape
    ix = np.zeros((h, w))
    iy = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            left = img[y, max(x - 1, 0)]
            right = img[y, min(x + 1, w - 1)]
            up = img[max(y - 1, 0), x]
            down = img[min(y + 1, h - 1), x]
            ix[y, x] = left - right
            iy[y, x] = up - down
    return ix, iy


def _fold(angle_deg):
    a = angle_deg
    while a < 0:
        a += 180.0
    while a >= 180.0:
        a -= 180.0
    return a


def hog_oracle(img, cell=8, block=(2, 2), stride=1, bins=9, eps=1e-6):
    """Brute-force HOG: one vote loop per pixel, explicit block normalisation."""
    ix, iy = gradient_oracle(img)
    h, w = ix.shape
    cy, cx = h // cell, w // cell
    width = 180.0 / bins
    hist = [[[0.0] * bins for _ in range(cx)] for _ in range(cy)]
    for y in range(cy * cell):
        for x in range(cx * cell):
            gx, gy = ix[y, x], iy[y, x]
            mag = math.sqrt(gx * gx + gy * gy)
            if mag == 0:
                continue
            a = _fold(math.degrees(math.atan2(gx, gy)))
            for b in range(bins):
                centre = (b + 0.5) * width
                d = abs(a - centre)
                d = min(d, 180.0 - d)
                if d < width:
                    hist[y // cell][x // cell][b] += mag * (1.0 - d / width)
    by, bx = block
    out = []
    for y0 in range(0, cy - by + 1, stride):
        for x0 in range(0, cx - bx + 1, stride):
            v = []
            for yy in range(y0, y0 + by):
                for xx in range(x0, x0 + bx):
                    v.extend(hist[yy][xx])
            norm = math.sqrt(sum(t * t for t in v) + eps * eps)
            out.extend(t / norm for t in v)
    return np.array(out)


def hog_length(h, w, cell, block, stride, bins):
    cy, cx = h // cell, w // cell
    return ((cy - block[0]) // stride + 1) * ((cx - block[1]) // stride + 1) * block[0] * block[1] * bins


def knn_oracle(points, labels, query, k):
    """Exhaustive weighted vote: ``1 / (d_i / d_{k+1})**2`` over the k nearest.

    Neighbours are ranked by (distance, label, position).  The normaliser is
    the (k+1)-th ranked distance, or the farthest one when the gallery holds
    no more than k points.  Any zero distance short-circuits to a vote among
    the exact matches.  Vote ties go to the lowest label.
    """
    n = len(points)
    d = [math.sqrt(sum((float(p) - float(q)) ** 2 for p, q in zip(points[i], query))) for i in range(n)]
    ranked = sorted(range(n), key=lambda i: (d[i], int(labels[i]), i))
    kk = min(k, n)
    exact = [i for i in ranked if d[i] == 0.0]
    if exact:
        chosen = {i: 1.0 for i in exact}
    else:
        ref = d[ranked[kk]] if n > kk else d[ranked[-1]]
        chosen = {i: 1.0 / (d[i] / ref) ** 2 for i in ranked[:kk]}
    score = {}
    for i, wt in chosen.items():
        score[int(labels[i])] = score.get(int(labels[i]), 0.0) + wt
    best = max(score.values())
    return min(c for c, v in score.items() if v == best)


def lstm_scalar_oracle(x, s_prev, c_prev, w, b):
    """The gate equations evaluated by hand for a width-1 cell."""
    sig = lambda a: 1.0 / (1.0 + math.exp(-a))
    z = x + s_prev
    i = sig(z * w["i"] + b["i"])
    f = sig(z * w["f"] + b["f"])
    o = sig(z * w["o"] + b["o"])
    g = math.tanh(z * w["g"] + b["g"])
    c = c_prev * f + g * i
    s = math.tanh(c) * o
    return {"i": i, "f": f, "o": o, "g": g, "c": c, "s": s}


def finite_difference(fn, params, step=1e-4):
    """Central differences of scalar ``fn()`` w.r.t. every entry of every array in ``params``."""
    out = {}
    for name, arr in params.items():
        num = np.zeros_like(arr, dtype=float)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + step
            up = fn()
            arr[idx] = old - step
            down = fn()
            arr[idx] = old
            num[idx] = (up - down) / (2 * step)
        out[name] = num
    return out


def relative_error(a, b, floor=1e-8):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
