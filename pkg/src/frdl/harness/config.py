"""Training configuration and the flat ``key = value`` config file format.

Recognised keys (defaults in brackets)::

    learning_rate [0.05]  epochs [30]  batch_size [8]  seed [0]  jump [6]
    split [0.6,0.2,0.2]   workers [1]
    k [10]  margin_tau [0.15]
    cell_size [8]  block_size [2]  block_stride [1]  bins [9]  hog_epsilon [1e-6]
    roi_size [64]  skeleton_frames [32]
    conv_channels [16,32]  cnn_fc [64]  skeleton_fc [32]
    hidden_dim [64]  lstm_layers [2]  bidirectional [true]
    bgs_samples [20]  bgs_radius [1]  match_radius [20]  min_matches [2]
    update_subsampling [16]  bgs_init [median]

Lines starting with ``#`` and blank lines are ignored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from frdl.classify import KnnParams
from frdl.errors import ConfigError
from frdl.hog import HogParams
from frdl.net.config import FC, LSTM, Conv, MaxPool, NetworkConfig, ReLU, SoftmaxHead


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 30
    batch_size: int = 8
    seed: int = 0
    jump: int = 6
    split: tuple[float, float, float] = (0.6, 0.2, 0.2)
    workers: int = 1
    hog: HogParams = field(default_factory=HogParams)
    knn: KnnParams = field(default_factory=KnnParams)
    roi_size: int = 64
    skeleton_frames: int = 32
    conv_channels: tuple[int, ...] = (16, 32)
    cnn_fc: int = 64
    skeleton_fc: int = 32
    hidden_dim: int = 64
    lstm_layers: int = 2
    bidirectional: bool = True
    bgs_samples: int = 20
    bgs_radius: int = 1
    match_radius: float = 20.0
    min_matches: int = 2
    update_subsampling: int = 16
    bgs_init: str = "median"

    def __post_init__(self):
        # lr = 0 is allowed here (a frozen-weights run); the CLI insists on lr > 0
        if not (self.learning_rate >= 0 and math.isfinite(self.learning_rate)):
            raise ConfigError("learning_rate must be a finite number >= 0")
        for name in ("epochs", "batch_size", "jump", "workers", "roi_size", "skeleton_frames",
                     "cnn_fc", "skeleton_fc", "hidden_dim", "lstm_layers", "bgs_samples",
                     "update_subsampling", "min_matches"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if len(self.split) != 3:
            raise ConfigError("split needs three ratios (train, val, test)")
        if self.bgs_init not in ("median", "first"):
            raise ConfigError("bgs_init must be 'median' or 'first'")
        if not self.conv_channels:
            raise ConfigError("conv_channels must list at least one layer")

    def bgs_kwargs(self) -> dict:
        return dict(l=self.bgs_samples, neighborhood_radius=self.bgs_radius,
                    match_radius=self.match_radius, min_matches=self.min_matches,
                    update_subsampling=self.update_subsampling)

    def hog_dim(self) -> int:
        return self.hog.length((self.roi_size, self.roi_size))

    def network_config(self, num_classes: int, num_joints: int | None = None) -> NetworkConfig:
        """Desk-scale network for this run.

        The first conv is 5x5/2 and later ones 3x3/1, each followed by ReLU
        and 2x2 max pooling; the skeleton branch is one padded 3x3 conv.
        """
        cnn = []
        for i, ch in enumerate(self.conv_channels):
            cnn += [Conv((5, 5), 2, ch) if i == 0 else Conv((3, 3), 1, ch), ReLU(), MaxPool(2, 2)]
        cnn += [FC(self.cnn_fc), ReLU()]
        skel = [Conv((3, 3), 1, 8, padding=1), ReLU(), MaxPool(2, 2), FC(self.skeleton_fc), ReLU()]
        if num_joints is not None and num_joints < 2:
            skel = [Conv((1, 3), 1, 8, padding=0), ReLU(), FC(self.skeleton_fc), ReLU()]
        fusion = ("cnn", "hog", "skeleton") if num_joints else ("cnn", "hog")
        return NetworkConfig(
            layers=cnn + [LSTM(self.hidden_dim, self.lstm_layers, self.bidirectional),
                          SoftmaxHead(num_classes)],
            frame_input=(self.roi_size, self.roi_size, 1),
            skeleton_layers=skel,
            skeleton_input=(num_joints, self.skeleton_frames, 3) if num_joints else None,
            hog_dim=self.hog_dim(),
            fusion=fusion,
        )


_HOG_KEYS = {"cell_size": "cell_size", "block_size": "block_size", "block_stride": "block_stride",
             "bins": "bins", "hog_epsilon": "epsilon"}
_KNN_KEYS = {"k": "k", "margin_tau": "margin_tau"}
_TOP_KEYS = {f.name: f for f in fields(TrainConfig) if f.name not in ("hog", "knn")}


def _parse_value(key: str, text: str, kind):
    text = text.strip()
    try:
        if kind in ("bool", bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if key == "split":
            return tuple(float(v) for v in text.split(","))
        if key == "conv_channels":
            return tuple(int(v) for v in text.split(","))
        if key == "block_size":
            parts = [int(v) for v in text.split(",")]
            return (parts[0], parts[0]) if len(parts) == 1 else tuple(parts)
        if kind in ("int", int):
            return int(text)
        if kind in ("float", float):
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"bad value for {key}: {text!r}") from None


_KINDS = {"cell_size": int, "block_stride": int, "bins": int, "hog_epsilon": float,
          "k": int, "margin_tau": float}


def apply_overrides(cfg: TrainConfig, values: dict) -> TrainConfig:
    """Return a copy of ``cfg`` with flat ``key -> value`` overrides applied."""
    top, hog, knn = {}, {}, {}
    for key, val in values.items():
        if key in _HOG_KEYS:
            hog[_HOG_KEYS[key]] = val
        elif key in _KNN_KEYS:
            knn[_KNN_KEYS[key]] = val
        elif key in _TOP_KEYS:
            top[key] = val
        else:
            raise ConfigError(f"unknown config key {key!r}")
    if hog:
        top["hog"] = replace(cfg.hog, **hog)
    if knn:
        top["knn"] = replace(cfg.knn, **knn)
    return replace(cfg, **top)


def parse_config_text(text: str, base: TrainConfig | None = None) -> TrainConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (p.strip() for p in line.split("=", 1))
        kind = _KINDS.get(key)
        if kind is None and key in _TOP_KEYS:
            kind = _TOP_KEYS[key].type
        values[key] = _parse_value(key, raw, kind)
    return apply_overrides(base or TrainConfig(), values)


def load_config(path, base: TrainConfig | None = None) -> TrainConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, base)


def config_to_text(cfg: TrainConfig) -> str:
    lines = []
    for key in _TOP_KEYS:
        val = getattr(cfg, key)
        if isinstance(val, tuple):
            val = ",".join(str(v) for v in val)
        elif isinstance(val, bool):
            val = str(val).lower()
        lines.append(f"{key} = {val}")
    for key, attr in _HOG_KEYS.items():
        val = getattr(cfg.hog, attr)
        if isinstance(val, tuple):
            val = ",".join(str(v) for v in val)
        lines.append(f"{key} = {val}")
    for key, attr in _KNN_KEYS.items():
        lines.append(f"{key} = {getattr(cfg.knn, attr)}")
    return "\n".join(lines) + "\n"
