"""Network layer specs, shape inference and presets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from frdl.errors import StructureError

FUSION_BLOCKS = ("cnn", "hog", "skeleton")


@dataclass(frozen=True)
class Conv:
    kernel: tuple[int, int]
    stride: int = 1
    out_channels: int = 8
    padding: int = 0


@dataclass(frozen=True)
class MaxPool:
    kernel: int = 2
    stride: int = 2


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class FC:
    out_dim: int


@dataclass(frozen=True)
class LSTM:
    hidden_dim: int = 64
    num_layers: int = 2
    bidirectional: bool = True


@dataclass(frozen=True)
class SoftmaxHead:
    num_classes: int


CnnLayer = Union[Conv, MaxPool, ReLU, FC]
Layer = Union[Conv, MaxPool, ReLU, FC, LSTM, SoftmaxHead]


def default_frame_cnn() -> list[CnnLayer]:
    return [
        Conv((5, 5), stride=2, out_channels=16), ReLU(), MaxPool(2, 2),
        Conv((3, 3), stride=1, out_channels=32), ReLU(), MaxPool(2, 2),
        FC(64), ReLU(),
    ]


def default_skeleton_cnn() -> list[CnnLayer]:
    return [Conv((3, 3), stride=1, out_channels=8, padding=1), ReLU(), MaxPool(2, 2), FC(32), ReLU()]


@dataclass
class NetworkConfig:
    """Frame CNN -> fusion -> input projection -> LSTM -> softmax head.

    ``layers`` holds the per-frame CNN, then exactly one :class:`LSTM`,
    then the :class:`SoftmaxHead`.  The skeleton image has its own CNN
    branch whose embedding is repeated at every time step.  Input shapes
    are ``(height, width, channels)``.
    """

    layers: list[Layer] = field(
        default_factory=lambda: default_frame_cnn() + [LSTM(64, 2, True), SoftmaxHead(3)]
    )
    frame_input: tuple[int, int, int] = (64, 64, 1)
    skeleton_layers: list[CnnLayer] = field(default_factory=default_skeleton_cnn)
    skeleton_input: tuple[int, int, int] | None = (5, 32, 3)
    hog_dim: int = 1764
    fusion: tuple[str, ...] = ("cnn", "hog", "skeleton")

    def __post_init__(self):
        self.fusion = tuple(self.fusion)
        self.validate()

    # -- structure -----------------------------------------------------------------

    @property
    def cnn_layers(self) -> list[CnnLayer]:
        return [l for l in self.layers if isinstance(l, (Conv, MaxPool, ReLU, FC))]

    @property
    def lstm(self) -> LSTM:
        return next(l for l in self.layers if isinstance(l, LSTM))

    @property
    def head(self) -> SoftmaxHead:
        return self.layers[-1]

    @property
    def num_classes(self) -> int:
        return self.head.num_classes

    @property
    def directions(self) -> tuple[str, ...]:
        return ("fwd", "bwd") if self.lstm.bidirectional else ("fwd",)

    def validate(self) -> None:
        if not self.layers or not isinstance(self.layers[-1], SoftmaxHead):
            raise StructureError("the last layer must be the softmax head")
        if sum(isinstance(l, SoftmaxHead) for l in self.layers) != 1:
            raise StructureError("exactly one softmax head is allowed")
        lstms = [i for i, l in enumerate(self.layers) if isinstance(l, LSTM)]
        if len(lstms) != 1 or lstms[0] != len(self.layers) - 2:
            raise StructureError("exactly one lstm layer, directly before the softmax head")
        unknown = set(self.fusion) - set(FUSION_BLOCKS)
        if unknown or not self.fusion or len(set(self.fusion)) != len(self.fusion):
            raise StructureError(f"fusion must be a nonempty subset of {FUSION_BLOCKS}")
        lstm = self.lstm
        if lstm.hidden_dim < 1 or lstm.num_layers < 1 or self.num_classes < 1:
            raise StructureError("hidden_dim, num_layers and num_classes must be >= 1")
        if "skeleton" in self.fusion and self.skeleton_input is None:
            raise StructureError("skeleton fusion needs a skeleton_input shape")
        if "hog" in self.fusion and self.hog_dim < 1:
            raise StructureError("hog fusion needs hog_dim >= 1")
        self.block_dims()  # raises on inconsistent CNN shapes

    def block_dims(self) -> dict[str, int]:
        dims = {}
        if "cnn" in self.fusion:
            dims["cnn"] = flat_dim(infer_shapes(self.cnn_layers, self.frame_input, "cnn")[-1])
        if "hog" in self.fusion:
            dims["hog"] = self.hog_dim
        if "skeleton" in self.fusion:
            dims["skeleton"] = flat_dim(
                infer_shapes(self.skeleton_layers, self.skeleton_input, "skel")[-1]
            )
        return {k: dims[k] for k in self.fusion}

    @property
    def fused_dim(self) -> int:
        return sum(self.block_dims().values())

    @property
    def embedding_dim(self) -> int:
        """Width of the final-state vector fed to the softmax head."""
        return self.lstm.hidden_dim * len(self.directions)


def flat_dim(shape) -> int:
    n = 1
    for d in shape:
        n *= d
    return n


def infer_shapes(layers, input_hwc, prefix="cnn") -> list[tuple[int, ...]]:
    """Output shape after every layer, ``(C, H, W)`` for maps, ``(D,)`` after FC.

    The first entry is the input shape itself.
    """
    if input_hwc is None:
        raise StructureError(f"{prefix}: no input shape")
    h, w, c = input_hwc
    shape: tuple[int, ...] = (c, h, w)
    shapes = [shape]
    for i, layer in enumerate(layers):
        name = f"{prefix}.{i} ({type(layer).__name__})"
        if isinstance(layer, Conv):
            if len(shape) != 3:
                raise StructureError(f"{name}: convolution after a flattened layer")
            kh, kw = layer.kernel
            oh = (shape[1] + 2 * layer.padding - kh) // layer.stride + 1
            ow = (shape[2] + 2 * layer.padding - kw) // layer.stride + 1
            if layer.stride < 1 or layer.out_channels < 1 or oh < 1 or ow < 1:
                raise StructureError(f"{name}: kernel {kh}x{kw} does not fit input {shape}")
            shape = (layer.out_channels, oh, ow)
        elif isinstance(layer, MaxPool):
            if len(shape) != 3:
                raise StructureError(f"{name}: pooling after a flattened layer")
            oh = (shape[1] - layer.kernel) // layer.stride + 1
            ow = (shape[2] - layer.kernel) // layer.stride + 1
            if oh < 1 or ow < 1:
                raise StructureError(f"{name}: pool {layer.kernel} does not fit input {shape}")
            shape = (shape[0], oh, ow)
        elif isinstance(layer, FC):
            if layer.out_dim < 1:
                raise StructureError(f"{name}: out_dim must be >= 1")
            shape = (layer.out_dim,)
        elif isinstance(layer, ReLU):
            pass
        else:
            raise StructureError(f"{name}: not allowed in a CNN branch")
        shapes.append(shape)
    return shapes


def alexnet_preset(num_classes: int = 101, hidden_dim: int = 64, with_skeleton: bool = False) -> NetworkConfig:
    """Conv1..FC8 layout on a 227x227 RGB crop.

    Padding follows the usual AlexNet arrangement (0, 2, 1, 1, 1); the
    table of kernels, strides and channel counts leaves it implicit.
    """
    r = ReLU()
    cnn = [
        Conv((11, 11), 4, 96), r, MaxPool(3, 2),
        Conv((5, 5), 1, 256, padding=2), r, MaxPool(3, 2),
        Conv((3, 3), 1, 384, padding=1), r,
        Conv((3, 3), 1, 384, padding=1), r,
        Conv((3, 3), 1, 256, padding=1), r, MaxPool(3, 2),
        FC(4096), r, FC(4096), r, FC(1000), r,
    ]
    return NetworkConfig(
        layers=cnn + [LSTM(hidden_dim, 2, True), SoftmaxHead(num_classes)],
        frame_input=(227, 227, 3),
        fusion=("cnn", "hog", "skeleton") if with_skeleton else ("cnn", "hog"),
    )
