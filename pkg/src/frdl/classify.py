"""Softmax decisions with a weighted k-nearest-neighbour fallback.

A Softmax output is accepted when its top-two margin reaches
``margin_tau``; otherwise the sample's embedding is labelled by W-KNN over
the training gallery.  W-KNN weights each of the ``k`` nearest neighbours by
``1 / (d_i / d_{k+1})**2``, the squared inverse of its distance normalised
by the next-nearest (``k+1``-th) gallery distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from frdl.errors import ConfigError, DataError

SOFTMAX = "softmax"
KNN = "knn"


@dataclass
class KnnParams:
    k: int = 10
    margin_tau: float = 0.15

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ConfigError(f"k must be a positive integer, got {self.k!r}")
        if not 0.0 <= self.margin_tau <= 1.0:
            raise ConfigError(f"margin_tau must lie in [0, 1], got {self.margin_tau!r}")
        self.k = int(self.k)


@dataclass
class Gallery:
    embeddings: np.ndarray  # (n, I)
    labels: np.ndarray  # (n,)

    def __post_init__(self):
        self.embeddings = np.atleast_2d(np.asarray(self.embeddings))
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if self.embeddings.shape[0] != self.labels.shape[0]:
            raise DataError("gallery needs one label per embedding")

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def to_tensors(self) -> dict[str, np.ndarray]:
        return {
            "gallery.embeddings": self.embeddings.astype(np.float32),
            "gallery.labels": self.labels.astype(np.float32),
        }

    @classmethod
    def from_tensors(cls, tensors) -> "Gallery | None":
        if "gallery.embeddings" not in tensors:
            return None
        return cls(tensors["gallery.embeddings"], tensors["gallery.labels"].astype(np.int64))


@dataclass
class Decision:
    label: int
    probabilities: np.ndarray | None
    route: str
    neighbor_ids: list[int] = field(default_factory=list)


def softmax_decide(probs, params: KnnParams) -> int | None:
    """Accepted class index, or None when the top-two margin is below tau."""
    p = np.asarray(probs, dtype=np.float64).ravel()
    if p.size == 0 or abs(p.sum() - 1.0) > 1e-6 or np.any(p < 0):
        raise ConfigError(f"not a probability vector (sum={p.sum() if p.size else 0})")
    top = int(np.argmax(p))  # first maximum: lowest index wins ties
    rest = np.delete(p, top)
    second = rest.max() if rest.size else 0.0
    if p[top] - second < params.margin_tau:
        return None
    return top


def _vote(labels: Sequence[int], weights: Sequence[float]) -> int:
    totals: dict[int, float] = {}
    for y, w in zip(labels, weights):
        totals[int(y)] = totals.get(int(y), 0.0) + float(w)
    best = max(totals.values())
    return min(y for y, v in totals.items() if v == best)


def knn_predict(gallery: Gallery, query, params: KnnParams, probabilities=None) -> Decision:
    if len(gallery) == 0:
        raise DataError("empty gallery")
    q = np.asarray(query, dtype=np.float64).ravel()
    if q.shape[0] != gallery.dim:
        raise DataError(f"query has dimension {q.shape[0]}, gallery {gallery.dim}")
    emb = gallery.embeddings.astype(np.float64)
    dist = np.sqrt(((emb - q) ** 2).sum(axis=1))
    # distance, then label: keeps the neighbour set independent of gallery order
    order = np.lexsort((gallery.labels, dist))
    k = min(params.k, len(gallery))

    exact = order[dist[order] == 0.0]
    if exact.size:
        label = _vote(gallery.labels[exact], np.ones(exact.size))
        return Decision(label, probabilities, KNN, exact.tolist())

    nearest = order[:k]
    # normaliser: the (k+1)-th distance, or the farthest one if the gallery is that small
    ref = dist[order[min(k, len(gallery) - 1)]]
    weights = 1.0 / (dist[nearest] / ref) ** 2
    label = _vote(gallery.labels[nearest], weights)
    return Decision(label, probabilities, KNN, nearest.tolist())


def route(probs, embedding, gallery: Gallery | None, params: KnnParams) -> Decision:
    """Softmax if confident, else W-KNN (argmax when no gallery is available)."""
    probs = np.asarray(probs, dtype=np.float64)
    label = softmax_decide(probs, params)
    if label is not None:
        return Decision(label, probs, SOFTMAX)
    if gallery is None or len(gallery) == 0:
        return Decision(int(np.argmax(probs)), probs, SOFTMAX)
    return knn_predict(gallery, embedding, params, probs)


def build_gallery(config, params, inputs, labels) -> Gallery:
    """One embedding (the final LSTM state fed to the head) per training input."""
    from frdl.net.model import check_params, forward

    if len(inputs) == 0:
        raise DataError("cannot build a gallery from an empty training set")
    check_params(config, params)
    emb = np.stack([forward(config, params, x)[1].embedding for x in inputs])
    return Gallery(emb.astype(np.float32), np.asarray(labels))
