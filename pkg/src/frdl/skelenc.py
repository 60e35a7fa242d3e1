"""Skeleton normalisation and skeleton-to-image encoding.

A sequence of ``N_F`` poses with ``K`` joints becomes a ``K x N_F`` RGB
image: rows are joints, columns are frames and the (X, Y, Z) coordinates,
affinely mapped into [0, 255] with the sequence's global min/max, become
the (R, G, B) channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from frdl.errors import DataError
from frdl.ingest import SkeletonSequence


@dataclass
class NormalizedSkeleton:
    joints: np.ndarray  # (N_F, K, 3), values in [0, 255]
    c_min: float
    c_max: float


@dataclass
class SkeletonImage:
    pixels: np.ndarray  # (K, frames, 3) uint8
    c_min: float
    c_max: float


def normalize_skeleton(seq: SkeletonSequence) -> NormalizedSkeleton:
    joints = np.asarray(seq.joints, dtype=np.float64)
    bad = ~np.isfinite(joints)
    if bad.any():
        f, k, _ = np.argwhere(bad)[0]
        raise DataError(f"non-finite skeleton coordinate at frame {f}, joint {k}")
    lo, hi = float(joints.min()), float(joints.max())
    if hi == lo:
        return NormalizedSkeleton(np.zeros_like(joints), lo, hi)
    out = 255.0 * (joints - lo) / (hi - lo)
    return NormalizedSkeleton(np.clip(out, 0.0, 255.0), lo, hi)


def resample_columns(n_src: int, n_dst: int) -> np.ndarray:
    """Nearest-neighbour source column for each of ``n_dst`` output columns."""
    return np.minimum(((np.arange(n_dst) + 0.5) * n_src / n_dst).astype(np.int64), n_src - 1)


def encode_skeleton_image(ns: NormalizedSkeleton, target_frames: int | None = None) -> SkeletonImage:
    n_f = ns.joints.shape[0]
    if n_f < 1:
        raise DataError("skeleton image needs at least one frame")
    target_frames = target_frames or n_f
    cols = resample_columns(n_f, target_frames)
    values = np.floor(ns.joints[cols] + 0.5)  # round half up
    pixels = np.clip(values, 0, 255).astype(np.uint8).transpose(1, 0, 2)
    return SkeletonImage(np.ascontiguousarray(pixels), ns.c_min, ns.c_max)


def decode_skeleton_image(img: SkeletonImage) -> np.ndarray:
    """Inverse affine map back to coordinates, ``(frames, K, 3)``."""
    scale = (img.c_max - img.c_min) / 255.0
    return img.c_min + img.pixels.transpose(1, 0, 2).astype(np.float64) * scale


def skeleton_to_image(seq: SkeletonSequence, target_frames: int | None = 32) -> SkeletonImage:
    return encode_skeleton_image(normalize_skeleton(seq), target_frames)
