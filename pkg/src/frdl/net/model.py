"""Parameter initialisation, forward pass and backpropagation for the full network.

Parameters live in a flat ``dict[str, ndarray]``.  Names::

    cnn.<i>.W / cnn.<i>.b          frame CNN layer i (conv: (out, in, kh, kw); fc: (in, out))
    skel.<i>.W / skel.<i>.b        skeleton CNN layer i
    proj.W / proj.b                fused features -> hidden width
    lstm.<dir>.<layer>.W_<g>, .b_<g>    dir in {fwd, bwd}, g in {i, f, o, g}
    head.V / head.b                (classes, embedding) output projection
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from frdl.errors import StructureError
from frdl.net import layers as L
from frdl.net.config import FC, Conv, MaxPool, NetworkConfig, ReLU, flat_dim, infer_shapes
from frdl.net.lstm import GATES, lstm_layer_backward, lstm_layer_forward

NetworkParams = dict  # str -> np.ndarray


@dataclass
class SequenceInput:
    """Per-sample network input.

    ``frames`` is ``(T, H, W)`` or ``(T, H, W, C)`` in [0, 1]; ``hog`` is
    ``(T, hog_dim)``; ``skeleton`` is the ``(K, F, 3)`` skeleton image in
    [0, 1] or None.
    """

    frames: np.ndarray | None
    hog: np.ndarray | None
    skeleton: np.ndarray | None = None

    @property
    def steps(self) -> int:
        for a in (self.frames, self.hog):
            if a is not None:
                return a.shape[0]
        raise StructureError("sequence input has neither frames nor hog features")


@dataclass
class ForwardTrace:
    caches: dict = field(default_factory=dict)
    embedding: np.ndarray | None = None
    logits: np.ndarray | None = None
    probs: np.ndarray | None = None
    signature: tuple = ()


def param_shapes(config: NetworkConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    for prefix, cnn_layers, inp in (
        ("cnn", config.cnn_layers, config.frame_input),
        ("skel", config.skeleton_layers, config.skeleton_input),
    ):
        block = "cnn" if prefix == "cnn" else "skeleton"
        if block not in config.fusion:
            continue
        io = infer_shapes(cnn_layers, inp, prefix)
        for i, layer in enumerate(cnn_layers):
            if isinstance(layer, Conv):
                shapes[f"{prefix}.{i}.W"] = (layer.out_channels, io[i][0], *layer.kernel)
                shapes[f"{prefix}.{i}.b"] = (layer.out_channels,)
            elif isinstance(layer, FC):
                shapes[f"{prefix}.{i}.W"] = (flat_dim(io[i]), layer.out_dim)
                shapes[f"{prefix}.{i}.b"] = (layer.out_dim,)
    h = config.lstm.hidden_dim
    shapes["proj.W"] = (config.fused_dim, h)
    shapes["proj.b"] = (h,)
    for d in config.directions:
        for k in range(config.lstm.num_layers):
            for g in GATES:
                shapes[f"lstm.{d}.{k}.W_{g}"] = (h, h)
            for g in GATES:
                shapes[f"lstm.{d}.{k}.b_{g}"] = (h,)
    shapes["head.V"] = (config.num_classes, config.embedding_dim)
    shapes["head.b"] = (config.num_classes,)
    return shapes


def _fans(name: str, shape) -> tuple[int, int]:
    if len(shape) == 4:  # conv
        rf = shape[2] * shape[3]
        return shape[1] * rf, shape[0] * rf
    if name == "head.V":
        return shape[1], shape[0]
    return shape[0], shape[1]


def init_params(config: NetworkConfig, seed: int = 0, dtype=np.float32) -> NetworkParams:
    """Glorot-uniform weights, zero biases, forget-gate biases at 1.0."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(config).items():
        if len(shape) == 1:
            val = 1.0 if name.endswith(".b_f") else 0.0
            params[name] = np.full(shape, val, dtype=dtype)
        else:
            fan_in, fan_out = _fans(name, shape)
            a = np.sqrt(6.0 / (fan_in + fan_out))
            params[name] = rng.uniform(-a, a, size=shape).astype(dtype)
    return params


def check_params(config: NetworkConfig, params: NetworkParams) -> None:
    expected = param_shapes(config)
    for name, shape in expected.items():
        if name not in params:
            raise StructureError(f"missing parameter {name}")
        if tuple(params[name].shape) != shape:
            raise StructureError(f"parameter {name} has shape {params[name].shape}, expected {shape}")


def lstm_layer_params(params, direction: str, layer: int) -> dict:
    p = f"lstm.{direction}.{layer}."
    return {k[len(p):]: v for k, v in params.items() if k.startswith(p)}


def _signature(params) -> tuple:
    return tuple((k, tuple(v.shape)) for k, v in params.items())


def _f64(a):
    return np.asarray(a, dtype=np.float64)


def _cnn_forward(cnn_layers, prefix, params, x):
    caches = []
    for i, layer in enumerate(cnn_layers):
        try:
            if isinstance(layer, Conv):
                x, c = L.conv_forward(x, _f64(params[f"{prefix}.{i}.W"]), _f64(params[f"{prefix}.{i}.b"]),
                                      layer.stride, layer.padding)
            elif isinstance(layer, MaxPool):
                x, c = L.maxpool_forward(x, layer.kernel, layer.stride)
            elif isinstance(layer, ReLU):
                x, c = L.relu_forward(x)
            elif isinstance(layer, FC):
                x, c = L.fc_forward(x, _f64(params[f"{prefix}.{i}.W"]), _f64(params[f"{prefix}.{i}.b"]))
        except ValueError as exc:
            raise StructureError(f"{prefix}.{i} ({type(layer).__name__}): {exc}") from exc
        caches.append(c)
    return x.reshape(x.shape[0], -1), (caches, x.shape)


def _cnn_backward(cnn_layers, prefix, dout, cache, grads):
    caches, outshape = cache
    d = dout.reshape(outshape)
    for i in range(len(cnn_layers) - 1, -1, -1):
        layer, c = cnn_layers[i], caches[i]
        if isinstance(layer, Conv):
            d, grads[f"{prefix}.{i}.W"], grads[f"{prefix}.{i}.b"] = L.conv_backward(d, c)
        elif isinstance(layer, MaxPool):
            d = L.maxpool_backward(d, c)
        elif isinstance(layer, ReLU):
            d = L.relu_backward(d, c)
        elif isinstance(layer, FC):
            d, grads[f"{prefix}.{i}.W"], grads[f"{prefix}.{i}.b"] = L.fc_backward(d, c)
    return d


def _nchw(images, channels):
    x = _f64(images)
    if x.ndim == 3:
        x = x[..., None]
    if x.shape[-1] != channels:
        raise StructureError(f"input has {x.shape[-1]} channels, expected {channels}")
    return x.transpose(0, 3, 1, 2)


def forward(config: NetworkConfig, params: NetworkParams, inp: SequenceInput):
    """Class probabilities for one sequence, plus the trace for :func:`backward`."""
    tr = ForwardTrace(signature=_signature(params))
    t_len = inp.steps
    blocks = []
    for block in config.fusion:
        if block == "cnn":
            if inp.frames is None or inp.frames.shape[0] != t_len:
                raise StructureError("cnn fusion needs one frame per time step")
            x = _nchw(inp.frames, config.frame_input[2])
            if x.shape[2:] != tuple(config.frame_input[:2]):
                raise StructureError(f"cnn: frames are {x.shape[2:]}, expected {config.frame_input[:2]}")
            emb, tr.caches["cnn"] = _cnn_forward(config.cnn_layers, "cnn", params, x)
            blocks.append(emb)
        elif block == "hog":
            if inp.hog is None or inp.hog.shape != (t_len, config.hog_dim):
                got = None if inp.hog is None else inp.hog.shape
                raise StructureError(f"hog: expected ({t_len}, {config.hog_dim}), got {got}")
            blocks.append(_f64(inp.hog))
        elif block == "skeleton":
            if inp.skeleton is None:
                raise StructureError("skeleton fusion requested but the sample has no skeleton image")
            x = _nchw(inp.skeleton[None], config.skeleton_input[2])
            if x.shape[2:] != tuple(config.skeleton_input[:2]):
                raise StructureError(
                    f"skel: image is {x.shape[2:]}, expected {config.skeleton_input[:2]}"
                )
            emb, tr.caches["skel"] = _cnn_forward(config.skeleton_layers, "skel", params, x)
            blocks.append(np.repeat(emb, t_len, axis=0))
    fused = np.concatenate(blocks, axis=1)
    tr.caches["block_widths"] = [b.shape[1] for b in blocks]
    if fused.shape[1] != config.fused_dim:
        raise StructureError(f"proj: fused width {fused.shape[1]} != {config.fused_dim}")

    W, b = _f64(params["proj.W"]), _f64(params["proj.b"])
    xs = fused @ W + b
    tr.caches["proj"] = fused

    finals = []
    for d in config.directions:
        seq = xs if d == "fwd" else xs[::-1]
        for k in range(config.lstm.num_layers):
            seq, tr.caches[f"lstm.{d}.{k}"] = lstm_layer_forward(lstm_layer_params(params, d, k), seq)
        finals.append(seq[-1])
    tr.embedding = np.concatenate(finals)
    tr.logits = _f64(params["head.V"]) @ tr.embedding + _f64(params["head.b"])
    tr.probs = L.softmax(tr.logits)
    tr.caches["t_len"] = t_len
    return tr.probs, tr


def backward(config: NetworkConfig, params: NetworkParams, trace: ForwardTrace, dlogits) -> dict:
    """Gradients of the loss w.r.t. every parameter, given dL/dlogits."""
    if trace.logits is None or trace.signature != _signature(params):
        raise StructureError("trace does not come from a forward pass with these parameters")
    dlogits = _f64(dlogits)
    if dlogits.shape != trace.logits.shape:
        raise StructureError(f"loss gradient shape {dlogits.shape} != logits {trace.logits.shape}")
    grads = {}
    V = _f64(params["head.V"])
    grads["head.V"] = np.outer(dlogits, trace.embedding)
    grads["head.b"] = dlogits.copy()
    demb = V.T @ dlogits

    t_len, h = trace.caches["t_len"], config.lstm.hidden_dim
    dxs = np.zeros((t_len, h))
    for n, d in enumerate(config.directions):
        dseq = np.zeros((t_len, h))
        dseq[-1] = demb[n * h:(n + 1) * h]
        for k in range(config.lstm.num_layers - 1, -1, -1):
            dseq, g = lstm_layer_backward(dseq, trace.caches[f"lstm.{d}.{k}"])
            for name, val in g.items():
                grads[f"lstm.{d}.{k}.{name}"] = val
        dxs += dseq if d == "fwd" else dseq[::-1]

    fused = trace.caches["proj"]
    grads["proj.W"] = fused.T @ dxs
    grads["proj.b"] = dxs.sum(axis=0)
    dfused = dxs @ _f64(params["proj.W"]).T

    start = 0
    for block, width in zip(config.fusion, trace.caches["block_widths"]):
        dblock = dfused[:, start:start + width]
        start += width
        if block == "cnn":
            _cnn_backward(config.cnn_layers, "cnn", dblock, trace.caches["cnn"], grads)
        elif block == "skeleton":
            # the embedding was repeated over time: gradients add up
            _cnn_backward(config.skeleton_layers, "skel", dblock.sum(axis=0, keepdims=True),
                          trace.caches["skel"], grads)
    return {k: grads[k] for k in params}


def cross_entropy(logits, label: int) -> float:
    return float(-L.log_softmax(logits)[label])


def cross_entropy_grad(probs, label: int) -> np.ndarray:
    """dL/dlogits for softmax followed by cross-entropy."""
    g = np.array(probs, dtype=np.float64)
    g[label] -= 1.0
    return g


def loss_and_grads(config, params, inp: SequenceInput, label: int):
    probs, tr = forward(config, params, inp)
    return cross_entropy(tr.logits, label), backward(config, params, tr, cross_entropy_grad(probs, label)), tr
