"""Mini-batch SGD training with best-validation model selection."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from frdl.classify import Gallery, build_gallery
from frdl.errors import DataError, DivergenceError
from frdl.harness.config import TrainConfig
from frdl.harness.preprocess import FeatureSequence, preprocess_dataset
from frdl.ingest import Dataset
from frdl.net.config import NetworkConfig
from frdl.net.model import (
    check_params, cross_entropy, cross_entropy_grad, forward, backward, init_params,
)

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    params: dict
    gallery: Gallery
    history: list[dict]
    net_config: NetworkConfig
    best_epoch: int
    class_names: list[str] = field(default_factory=list)


def num_joints(feats: list[FeatureSequence]) -> int | None:
    """Joint count when every sample carries a skeleton, else None."""
    if not feats or any(f.skeleton is None for f in feats):
        return None
    ks = {f.skeleton.pixels.shape[0] for f in feats}
    if len(ks) != 1:
        raise DataError(f"samples disagree on the number of skeleton joints: {sorted(ks)}")
    return ks.pop()


def _inputs(feats, net_config):
    use_skel = "skeleton" in net_config.fusion
    return [f.to_input(use_skel) for f in feats]


def _accuracy_and_loss(net_config, params, inputs, labels):
    if not inputs:
        return float("nan"), float("nan")
    correct, loss = 0, 0.0
    for x, y in zip(inputs, labels):
        probs, tr = forward(net_config, params, x)
        correct += int(np.argmax(probs) == y)
        loss += cross_entropy(tr.logits, y)
    return correct / len(inputs), loss / len(inputs)


def fit(cfg: TrainConfig, net_config: NetworkConfig, train_feats, val_feats=()) -> TrainResult:
    if not train_feats:
        raise DataError("training set is empty")
    rng = np.random.default_rng(cfg.seed)
    params = init_params(net_config, cfg.seed)
    xs = _inputs(train_feats, net_config)
    ys = [f.label for f in train_feats]
    vx = _inputs(val_feats, net_config)
    vy = [f.label for f in val_feats]

    best_key, best_params, best_epoch = None, dict(params), 0
    history = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(xs))
        total = 0.0
        for b, start in enumerate(range(0, len(order), cfg.batch_size), start=1):
            batch = order[start:start + cfg.batch_size]
            grads = {k: np.zeros(v.shape) for k, v in params.items()}
            batch_loss = 0.0
            for i in batch:  # fixed summation order keeps runs bitwise identical
                probs, tr = forward(net_config, params, xs[i])
                loss = cross_entropy(tr.logits, ys[i])
                if not math.isfinite(loss):
                    raise DivergenceError(epoch, b, loss)
                for k, g in backward(net_config, params, tr, cross_entropy_grad(probs, ys[i])).items():
                    grads[k] += g
                batch_loss += loss
            step = cfg.learning_rate / len(batch)
            for k in params:
                with np.errstate(over="ignore"):
                    updated = (params[k].astype(np.float64) - step * grads[k]).astype(np.float32)
                if not np.all(np.isfinite(updated)):
                    raise DivergenceError(epoch, b, float("nan"))
                params[k] = updated
            total += batch_loss
        train_loss = total / len(xs)
        val_acc, val_loss = _accuracy_and_loss(net_config, params, vx, vy)
        history.append({"epoch": epoch, "train_loss": train_loss, "val_acc": val_acc, "val_loss": val_loss})
        log.info("epoch %d  train_loss %.4f  val_acc %.3f  val_loss %.4f", epoch, train_loss, val_acc, val_loss)
        # best validation accuracy; lower validation loss breaks ties
        key = (val_acc, -val_loss) if vx else (0.0, -train_loss)
        if best_key is None or key > best_key:
            best_key, best_params, best_epoch = key, {k: v.copy() for k, v in params.items()}, epoch

    check_params(net_config, best_params)
    gallery = build_gallery(net_config, best_params, xs, ys)
    return TrainResult(best_params, gallery, history, net_config, best_epoch)


def train(cfg: TrainConfig, train_set: Dataset, val_set: Dataset | None = None) -> TrainResult:
    """Preprocess both sets, fit, and build the W-KNN gallery from the training set."""
    train_feats = preprocess_dataset(train_set.samples, cfg)
    val_feats = preprocess_dataset(val_set.samples, cfg) if val_set is not None else []
    net_config = cfg.network_config(train_set.num_classes, num_joints(train_feats))
    result = fit(cfg, net_config, train_feats, val_feats)
    result.class_names = list(train_set.class_names)
    return result
