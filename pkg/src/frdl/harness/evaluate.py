"""Routed evaluation and confusion matrices."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from frdl.classify import Decision, Gallery, KnnParams, route
from frdl.errors import DataError
from frdl.net.config import NetworkConfig
from frdl.net.model import forward


@dataclass
class ConfusionMatrix:
    """``counts[true, predicted]``."""

    counts: np.ndarray
    class_names: list[str] = field(default_factory=list)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total) if self.total else float("nan")

    def per_class_accuracy(self) -> np.ndarray:
        rows = self.counts.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(rows > 0, np.diag(self.counts) / np.maximum(rows, 1), np.nan)

    def to_csv(self) -> str:
        names = self.class_names or [str(i) for i in range(len(self.counts))]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\predicted", *names])
        for name, row in zip(names, self.counts):
            w.writerow([name, *(int(v) for v in row)])
        return buf.getvalue()


def confusion_matrix(y_true, y_pred, num_classes: int, class_names=None) -> ConfusionMatrix:
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (np.asarray(y_true, dtype=np.int64), np.asarray(y_pred, dtype=np.int64)), 1)
    return ConfusionMatrix(counts, list(class_names or []))


@dataclass
class Metrics:
    accuracy: float
    per_class_accuracy: dict[str, float]
    samples: int
    routed_softmax: int
    routed_knn: int

    def to_text(self) -> str:
        lines = [
            f"accuracy {self.accuracy:.6f}",
            f"samples {self.samples}",
            f"routed_softmax {self.routed_softmax}",
            f"routed_knn {self.routed_knn}",
        ]
        lines += [f"accuracy[{name}] {acc:.6f}" for name, acc in self.per_class_accuracy.items()]
        return "\n".join(lines) + "\n"


def predict_features(net_config: NetworkConfig, params, gallery: Gallery | None, knn: KnnParams, feats) -> list[Decision]:
    use_skel = "skeleton" in net_config.fusion
    out = []
    for f in feats:
        probs, tr = forward(net_config, params, f.to_input(use_skel))
        out.append(route(probs, tr.embedding, gallery, knn))
    return out


def evaluate_features(net_config, params, gallery, knn, feats, class_names):
    if len(feats) == 0:
        raise DataError("cannot evaluate an empty test set")
    decisions = predict_features(net_config, params, gallery, knn, feats)
    cm = confusion_matrix([f.label for f in feats], [d.label for d in decisions],
                          len(class_names), class_names)
    per_class = cm.per_class_accuracy()
    metrics = Metrics(
        accuracy=cm.accuracy,
        per_class_accuracy={n: float(a) for n, a in zip(class_names, per_class)},
        samples=cm.total,
        routed_softmax=sum(d.route == "softmax" for d in decisions),
        routed_knn=sum(d.route == "knn" for d in decisions),
    )
    return metrics, cm


def evaluate(params, gallery, cfg, test_set, net_config: NetworkConfig):
    """Route every test sample through Softmax / W-KNN; returns (Metrics, ConfusionMatrix)."""
    from frdl.harness.preprocess import preprocess_dataset

    if len(test_set) == 0:
        raise DataError("cannot evaluate an empty test set")
    feats = preprocess_dataset(test_set.samples, cfg)
    return evaluate_features(net_config, params, gallery, cfg.knn, feats, test_set.class_names)
