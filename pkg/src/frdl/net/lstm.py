"""LSTM cell with additive input/state mixing.

Every gate reads the *sum* ``z = x_t + s_{t-1}`` (not a concatenation)::

    i = sigmoid(z W_i + b_i)     f = sigmoid(z W_f + b_f)
    o = sigmoid(z W_o + b_o)     g = tanh(z W_g + b_g)
    c_t = c_{t-1} * f + g * i    s_t = tanh(c_t) * o

so the input width must equal the hidden width; the network puts a learned
projection in front of the first layer to guarantee that.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from frdl.errors import StructureError

GATES = ("i", "f", "o", "g")


@dataclass
class LstmState:
    s: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden_dim: int) -> "LstmState":
        return cls(np.zeros(hidden_dim), np.zeros(hidden_dim))


def sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def stacked_weights(layer_params):
    """Gate weights side by side, ``(H, 4H)``, and biases ``(4H,)``."""
    W = np.concatenate([np.asarray(layer_params[f"W_{g}"], np.float64) for g in GATES], axis=1)
    b = np.concatenate([np.asarray(layer_params[f"b_{g}"], np.float64) for g in GATES])
    return W, b


def _step(W, b, x, s_prev, c_prev):
    h = s_prev.shape[0]
    z = x + s_prev
    a = z @ W + b
    i = sigmoid(a[:h])
    f = sigmoid(a[h:2 * h])
    o = sigmoid(a[2 * h:3 * h])
    g = np.tanh(a[3 * h:])
    c = c_prev * f + g * i
    tc = np.tanh(c)
    s = tc * o
    return s, c, (z, i, f, o, g, c_prev, tc)


def lstm_cell_step(layer_params, x, prev: LstmState | None = None) -> LstmState:
    """One time step; ``layer_params`` maps ``W_i.. b_g`` to arrays."""
    W, b = stacked_weights(layer_params)
    h = W.shape[0]
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    prev = prev or LstmState.zeros(h)
    if x.shape != (h,) or prev.s.shape != (h,) or prev.c.shape != (h,):
        raise StructureError(f"lstm step expects vectors of length {h}, got x {x.shape}")
    s, c, _ = _step(W, b, x, np.asarray(prev.s, np.float64), np.asarray(prev.c, np.float64))
    return LstmState(s, c)


def lstm_gates(layer_params, x, prev: LstmState) -> dict[str, np.ndarray]:
    W, b = stacked_weights(layer_params)
    _, _, (_, i, f, o, g, _, _) = _step(W, b, np.atleast_1d(x).astype(np.float64), prev.s, prev.c)
    return {"i": i, "f": f, "o": o, "g": g}


def lstm_layer_forward(layer_params, xs):
    """Run a sequence ``(T, H)`` from a zero state; returns ``(states, cache)``."""
    W, b = stacked_weights(layer_params)
    t_len, h = xs.shape
    if W.shape[0] != h:
        raise StructureError(f"lstm layer expects inputs of width {W.shape[0]}, got {h}")
    s, c = np.zeros(h), np.zeros(h)
    out = np.empty((t_len, h))
    steps = []
    for t in range(t_len):
        s, c, cache = _step(W, b, xs[t], s, c)
        out[t] = s
        steps.append(cache)
    return out, (W, steps)


def lstm_layer_backward(d_states, cache):
    """Backpropagation through time.

    ``d_states`` is the loss gradient w.r.t. every output state ``s_t``.
    Returns ``(d_inputs, grads)`` with grads keyed like the layer params.
    """
    W, steps = cache
    t_len, h = d_states.shape
    dW = np.zeros_like(W)
    db = np.zeros(4 * h)
    dx = np.empty((t_len, h))
    ds_next = np.zeros(h)
    dc_next = np.zeros(h)
    for t in range(t_len - 1, -1, -1):
        z, i, f, o, g, c_prev, tc = steps[t]
        ds = d_states[t] + ds_next
        do = ds * tc
        dc = dc_next + ds * o * (1.0 - tc * tc)
        da = np.concatenate([
            dc * g * i * (1.0 - i),
            dc * c_prev * f * (1.0 - f),
            do * o * (1.0 - o),
            dc * i * (1.0 - g * g),
        ])
        dW += np.outer(z, da)
        db += da
        dz = W @ da
        dx[t] = dz
        ds_next = dz  # z = x_t + s_{t-1}: both receive dz
        dc_next = dc * f
    grads = {}
    for k, gate in enumerate(GATES):
        grads[f"W_{gate}"] = dW[:, k * h:(k + 1) * h]
        grads[f"b_{gate}"] = db[k * h:(k + 1) * h]
    return dx, grads
