import math
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from threadpoolctl import threadpool_limits

from frdl.errors import (
    BadMagicError, CheckpointError, ShapeMismatchError, StructureError, TruncatedCheckpointError,
    VersionMismatchError,
)
from frdl.net import (
    FC, LSTM, Conv, LstmState, NetworkConfig, ReLU, SequenceInput, SoftmaxHead,
    alexnet_preset, backward, cross_entropy, cross_entropy_grad, forward, infer_shapes,
    init_params, load_checkpoint, lstm_cell_step, param_shapes, save_checkpoint,
)
from frdl.net import layers as L
from frdl.net.checkpoint import decode_tensors, encode_tensors
from frdl.net.lstm import lstm_gates, lstm_layer_backward, lstm_layer_forward
from frdl.net.model import loss_and_grads
from oracles import finite_difference, lstm_scalar_oracle, relative_error


def _unit_layer(h, fill=1.0):
    p = {f"W_{g}": np.full((h, h), fill) for g in "ifog"}
    p.update({f"b_{g}": np.zeros(h) for g in "ifog"})
    return p


def _tiny_input(rng, t=4):
    return SequenceInput(rng.random((t, 8, 8)), rng.random((t, 5)), rng.random((3, 4, 3)))


# -- LSTM cell ------------------------------------------------------------------


def test_lstm_all_zero():
    p = _unit_layer(3, 0.0)
    st_ = lstm_cell_step(p, np.zeros(3), LstmState.zeros(3))
    assert np.all(st_.s == 0) and np.all(st_.c == 0)
    gates = lstm_gates(p, np.zeros(3), LstmState.zeros(3))
    for g in "ifo":
        assert np.all(gates[g] == 0.5)
    assert np.all(gates["g"] == 0)


def test_lstm_scalar_hand_values():
    st_ = lstm_cell_step(_unit_layer(1), np.array([1.0]), LstmState.zeros(1))
    ref = lstm_scalar_oracle(1.0, 0.0, 0.0, dict.fromkeys("ifog", 1.0), dict.fromkeys("ifog", 0.0))
    assert st_.c[0] == pytest.approx(0.5568, abs=1e-4)
    assert st_.s[0] == pytest.approx(0.3697, abs=1e-4)
    assert st_.s[0] == pytest.approx(ref["s"], abs=1e-12)


@given(
    x=st.floats(-3, 3), s=st.floats(-1, 1), c=st.floats(-5, 5),
    w=st.tuples(*[st.floats(-2, 2)] * 4), b=st.tuples(*[st.floats(-2, 2)] * 4),
)
def test_lstm_scalar_matches_oracle(x, s, c, w, b):
    p = {f"W_{g}": np.array([[v]]) for g, v in zip("ifog", w)}
    p.update({f"b_{g}": np.array([v]) for g, v in zip("ifog", b)})
    out = lstm_cell_step(p, np.array([x]), LstmState(np.array([s]), np.array([c])))
    ref = lstm_scalar_oracle(x, s, c, dict(zip("ifog", w)), dict(zip("ifog", b)))
    assert out.s[0] == pytest.approx(ref["s"], abs=1e-12)
    assert out.c[0] == pytest.approx(ref["c"], abs=1e-12)


def test_saturated_forget_carries_cell():
    p = _unit_layer(2, 0.0)
    p["b_f"] = np.full(2, 10.0)
    prev = LstmState(np.array([0.3, -0.2]), np.array([1.5, -0.7]))
    out = lstm_cell_step(p, np.array([0.4, 0.1]), prev)
    np.testing.assert_allclose(out.c, prev.c, rtol=1e-4)


def test_lstm_dimension_mismatch():
    with pytest.raises(StructureError):
        lstm_cell_step(_unit_layer(3), np.zeros(4))


@given(seed=st.integers(0, 10_000), t=st.integers(1, 12))
def test_gate_ranges_and_cell_bound(seed, t):
    rng = np.random.default_rng(seed)
    h = 3
    p = {f"W_{g}": rng.normal(0, 2, (h, h)) for g in "ifog"}
    p.update({f"b_{g}": rng.normal(0, 2, h) for g in "ifog"})
    state = LstmState.zeros(h)
    for step in range(1, t + 1):
        x = rng.uniform(-5, 5, h)
        gates = lstm_gates(p, x, state)
        for g in "ifo":
            assert np.all((gates[g] >= 0) & (gates[g] <= 1))
        assert np.all(np.abs(gates["g"]) <= 1)
        state = lstm_cell_step(p, x, state)
        assert np.all(np.abs(state.c) <= step * 1.0 + 1e-12)


# -- layer gradients in isolation -----------------------------------------------


def _check_layer(fwd, bwd, arrays_, rng):
    out, cache = fwd()
    r = rng.normal(size=out.shape)
    analytic = bwd(r, cache)
    numeric = finite_difference(lambda: float((fwd()[0] * r).sum()), arrays_)
    for name, g in analytic.items():
        assert relative_error(g, numeric[name]).max() < 1e-5, name


@pytest.mark.parametrize("stride,padding", [(1, 0), (2, 1), (1, 2)])
def test_conv_gradient(rng, stride, padding):
    a = {"x": rng.normal(size=(2, 2, 6, 7)), "W": rng.normal(size=(3, 2, 3, 3)), "b": rng.normal(size=3)}
    fwd = lambda: L.conv_forward(a["x"], a["W"], a["b"], stride, padding)

    def bwd(d, cache):
        dx, dW, db = L.conv_backward(d, cache)
        return {"x": dx, "W": dW, "b": db}

    _check_layer(fwd, bwd, a, rng)


def test_conv_matches_loop(rng):
    x = rng.normal(size=(1, 2, 5, 5))
    W = rng.normal(size=(2, 2, 3, 3))
    b = rng.normal(size=2)
    out, _ = L.conv_forward(x, W, b, stride=2, padding=1)
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    ref = np.zeros((1, 2, 3, 3))
    for o in range(2):
        for i in range(3):
            for j in range(3):
                ref[0, o, i, j] = (xp[0, :, 2 * i:2 * i + 3, 2 * j:2 * j + 3] * W[o]).sum() + b[o]
    np.testing.assert_allclose(out, ref, atol=1e-12)


def test_maxpool_gradient(rng):
    a = {"x": rng.normal(size=(2, 2, 6, 6))}
    _check_layer(lambda: L.maxpool_forward(a["x"], 2, 2),
                 lambda d, c: {"x": L.maxpool_backward(d, c)}, a, rng)


def test_overlapping_maxpool_gradient(rng):
    a = {"x": rng.normal(size=(1, 2, 7, 7))}
    _check_layer(lambda: L.maxpool_forward(a["x"], 3, 2),
                 lambda d, c: {"x": L.maxpool_backward(d, c)}, a, rng)


def test_relu_gradient(rng):
    a = {"x": rng.normal(size=(3, 7)) + 0.05}
    _check_layer(lambda: L.relu_forward(a["x"]), lambda d, c: {"x": L.relu_backward(d, c)}, a, rng)


def test_fc_gradient(rng):
    a = {"x": rng.normal(size=(3, 2, 2, 2)), "W": rng.normal(size=(8, 4)), "b": rng.normal(size=4)}

    def bwd(d, cache):
        dx, dW, db = L.fc_backward(d, cache)
        return {"x": dx, "W": dW, "b": db}

    _check_layer(lambda: L.fc_forward(a["x"], a["W"], a["b"]), bwd, a, rng)


def test_lstm_layer_gradient(rng):
    h = 3
    p = {f"W_{g}": rng.normal(0, 0.7, (h, h)) for g in "ifog"}
    p.update({f"b_{g}": rng.normal(0, 0.5, h) for g in "ifog"})
    a = dict(p, xs=rng.normal(size=(5, h)))

    def fwd():
        return lstm_layer_forward({k: v for k, v in a.items() if k != "xs"}, a["xs"])

    def bwd(d, cache):
        dx, grads = lstm_layer_backward(d, cache)
        return dict(grads, xs=dx)

    _check_layer(fwd, bwd, a, rng)


# -- softmax --------------------------------------------------------------------


@given(arrays(np.float64, st.integers(1, 20), elements=st.floats(-50, 50)))
def test_softmax_normalised(logits):
    p = L.softmax(logits)
    assert np.all(p >= 0)
    assert abs(p.sum() - 1.0) < 1e-9


def test_softmax_closed_form():
    np.testing.assert_allclose(L.softmax(np.array([math.log(2), 0.0])), [2 / 3, 1 / 3])


# -- full network ---------------------------------------------------------------


def test_zero_head_gives_uniform(tiny_config, rng):
    params = init_params(tiny_config, 0)
    params["head.V"][:] = 0
    probs, _ = forward(tiny_config, params, _tiny_input(rng))
    np.testing.assert_allclose(probs, 1 / 3)


def test_forward_probabilities_sum_to_one(tiny_config, rng):
    probs, trace = forward(tiny_config, init_params(tiny_config, 1), _tiny_input(rng))
    assert probs.shape == (3,)
    assert abs(probs.sum() - 1) < 1e-12
    assert trace.embedding.shape == (tiny_config.embedding_dim,) == (8,)


def test_param_names_and_shapes(tiny_config):
    shapes = param_shapes(tiny_config)
    assert shapes["proj.W"] == (tiny_config.fused_dim, 4)
    assert shapes["head.V"] == (3, 8)
    for d in ("fwd", "bwd"):
        for k in range(2):
            for g in "ifog":
                assert shapes[f"lstm.{d}.{k}.W_{g}"] == (4, 4)
                assert shapes[f"lstm.{d}.{k}.b_{g}"] == (4,)


def test_init_is_glorot_with_forget_bias(tiny_config):
    params = init_params(tiny_config, 3)
    for name, v in params.items():
        assert v.dtype == np.float32
        if name.endswith(".b_f"):
            assert np.all(v == 1.0)
        elif v.ndim == 1:
            assert np.all(v == 0.0)
    w = params["proj.W"]
    a = math.sqrt(6 / sum(w.shape))
    assert np.abs(w).max() <= a
    b = init_params(tiny_config, 3)
    assert all(np.array_equal(params[k], b[k]) for k in params)


def test_alexnet_preset_shapes():
    cfg = alexnet_preset(num_classes=101)
    shapes = infer_shapes(cfg.cnn_layers, cfg.frame_input)
    assert shapes[1] == (96, 55, 55)
    assert shapes[3] == (96, 27, 27)
    assert shapes[-1] == (1000,)
    assert param_shapes(cfg)["cnn.17.W"] == (4096, 1000)
    assert cfg.block_dims()["cnn"] == 1000


def test_shape_error_names_layer(tiny_config, rng):
    params = init_params(tiny_config, 0)
    bad = SequenceInput(rng.random((4, 8, 8)), rng.random((4, 6)), rng.random((3, 4, 3)))
    with pytest.raises(StructureError, match="hog"):
        forward(tiny_config, params, bad)
    params["cnn.5.W"] = np.zeros((7, 3), np.float32)
    with pytest.raises(StructureError, match=r"cnn\.5"):
        forward(tiny_config, params, _tiny_input(rng))


def test_invalid_layer_orders():
    with pytest.raises(StructureError):
        NetworkConfig(layers=[FC(3), SoftmaxHead(2)])
    with pytest.raises(StructureError):
        NetworkConfig(layers=[FC(3), LSTM(4, 1, False), SoftmaxHead(2), SoftmaxHead(2)])
    with pytest.raises(StructureError):
        NetworkConfig(layers=[Conv((9, 9), 1, 2), LSTM(4, 1, False), SoftmaxHead(2)], frame_input=(4, 4, 1))


def test_zero_loss_gradient_gives_zero_grads(tiny_config, rng):
    params = init_params(tiny_config, 0)
    _, trace = forward(tiny_config, params, _tiny_input(rng))
    grads = backward(tiny_config, params, trace, np.zeros(3))
    assert set(grads) == set(params)
    assert all(not g.any() for g in grads.values())


def test_duplicated_sample_doubles_gradient(tiny_config, rng):
    params = init_params(tiny_config, 0)
    inp = _tiny_input(rng)
    _, g1, _ = loss_and_grads(tiny_config, params, inp, 2)
    total = {k: np.zeros(v.shape) for k, v in params.items()}
    for _ in range(2):
        for k, v in loss_and_grads(tiny_config, params, inp, 2)[1].items():
            total[k] += v
    for k in params:
        np.testing.assert_array_equal(total[k], 2 * g1[k])


def test_stale_trace_rejected(tiny_config, rng):
    params = init_params(tiny_config, 0)
    _, trace = forward(tiny_config, params, _tiny_input(rng))
    other = dict(params)
    other["head.V"] = np.zeros((3, 8), np.float32)
    other["extra"] = np.zeros(1, np.float32)
    with pytest.raises(StructureError):
        backward(tiny_config, other, trace, np.zeros(3))


def test_forward_is_deterministic_across_threads(tiny_config, rng):
    params = init_params(tiny_config, 0)
    inp = _tiny_input(rng)
    with threadpool_limits(limits=1):
        a = forward(tiny_config, params, inp)[0]
    b = forward(tiny_config, params, inp)[0]
    assert a.tobytes() == b.tobytes()


def test_cross_entropy_matches_definition(rng):
    logits = rng.normal(size=4)
    p = L.softmax(logits)
    assert cross_entropy(logits, 2) == pytest.approx(-math.log(p[2]))
    g = cross_entropy_grad(p, 2)
    assert g.sum() == pytest.approx(0.0, abs=1e-12)


def test_skeleton_free_network(rng):
    cfg = NetworkConfig(
        layers=[Conv((3, 3), 1, 2), ReLU(), FC(3), LSTM(4, 1, False), SoftmaxHead(2)],
        frame_input=(6, 6, 1), skeleton_input=None, hog_dim=5, fusion=("cnn", "hog"),
    )
    params = {k: v.astype(np.float64) for k, v in init_params(cfg, 0).items()}
    assert not any(k.startswith("skel.") for k in params)
    inp = SequenceInput(rng.random((3, 6, 6)), rng.random((3, 5)))
    loss, grads, _ = loss_and_grads(cfg, params, inp, 1)
    numeric = finite_difference(lambda: cross_entropy(forward(cfg, params, inp)[1].logits, 1), params)
    for k in params:
        assert relative_error(grads[k], numeric[k]).max() < 1e-4, k


# -- checkpoints ----------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path, tiny_config):
    params = init_params(tiny_config, 5)
    save_checkpoint(params, tmp_path / "m.frdl")
    back, gallery = load_checkpoint(tmp_path / "m.frdl", param_shapes(tiny_config))
    assert gallery is None
    assert list(back) == list(params)
    for k in params:
        assert back[k].tobytes() == params[k].tobytes()


def test_checkpoint_header_layout(tiny_config):
    buf = encode_tensors({"a": np.arange(6, dtype=np.float32).reshape(2, 3)})
    assert buf[:4] == b"FRDL"
    assert struct.unpack("<III", buf[4:16]) == (1, 1, 1)
    assert buf[16:17] == b"a"
    assert struct.unpack("<III", buf[17:29]) == (2, 2, 3)
    assert np.frombuffer(buf[29:], "<f4").tolist() == [0, 1, 2, 3, 4, 5]


def test_checkpoint_errors_are_distinct(tiny_config):
    buf = encode_tensors(init_params(tiny_config, 0))
    with pytest.raises(BadMagicError, match="bad magic"):
        decode_tensors(b"XRDL" + buf[4:])
    with pytest.raises(VersionMismatchError):
        decode_tensors(buf[:4] + struct.pack("<I", 2) + buf[8:])
    with pytest.raises(TruncatedCheckpointError):
        decode_tensors(buf[:-3])
    with pytest.raises(CheckpointError):
        decode_tensors(buf + b"\0")


def test_checkpoint_shape_mismatch_names_tensor(tmp_path, tiny_config):
    params = init_params(tiny_config, 0)
    params["proj.W"] = np.zeros((2, 2), np.float32)
    save_checkpoint(params, tmp_path / "m.frdl")
    with pytest.raises(ShapeMismatchError, match=r"proj\.W"):
        load_checkpoint(tmp_path / "m.frdl", param_shapes(tiny_config))


def test_checkpoint_rejects_non_finite():
    with pytest.raises(CheckpointError):
        encode_tensors({"a": np.array([np.inf], np.float32)})
