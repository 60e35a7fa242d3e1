from frdl.net.config import (
    FC, LSTM, Conv, MaxPool, NetworkConfig, ReLU, SoftmaxHead, alexnet_preset, infer_shapes,
)
from frdl.net.lstm import LstmState, lstm_cell_step
from frdl.net.model import (
    ForwardTrace, NetworkParams, SequenceInput, backward, check_params, cross_entropy,
    cross_entropy_grad, forward, init_params, loss_and_grads, param_shapes,
)
from frdl.net.checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "FC", "LSTM", "Conv", "MaxPool", "NetworkConfig", "ReLU", "SoftmaxHead", "alexnet_preset",
    "infer_shapes", "LstmState", "lstm_cell_step", "ForwardTrace", "NetworkParams",
    "SequenceInput", "backward", "check_params", "cross_entropy", "cross_entropy_grad",
    "forward", "init_params", "loss_and_grads", "param_shapes", "load_checkpoint",
    "save_checkpoint",
]
