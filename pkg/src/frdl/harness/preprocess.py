"""Per-sample preprocessing: frame selection, BGS, ROI, HOG and skeleton image."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from frdl.bgs import BoundingBox, extract_roi, segment_clip
from frdl.errors import DataError
from frdl.harness.config import TrainConfig
from frdl.hog import hog_descriptor, resize_bilinear
from frdl.ingest import LabeledSample, align_skeleton, select_representatives, to_gray
from frdl.net.model import SequenceInput
from frdl.skelenc import SkeletonImage, skeleton_to_image


@dataclass
class FeatureSequence:
    sample_id: str
    label: int
    frame_indices: np.ndarray
    crops: np.ndarray  # (T, S, S) float in [0, 1]
    hog: np.ndarray  # (T, hog_dim)
    rois: list[BoundingBox]
    masks: np.ndarray  # (T, H, W) opened foreground masks
    skeleton: SkeletonImage | None = None
    nominal_rate: float = 24.0
    n_source_frames: int = 0

    def __len__(self) -> int:
        return len(self.frame_indices)

    def to_input(self, use_skeleton: bool = True) -> SequenceInput:
        skel = None
        if use_skeleton and self.skeleton is not None:
            skel = self.skeleton.pixels.astype(np.float64) / 255.0
        return SequenceInput(self.crops, self.hog, skel)


def silhouette_crop(gray, mask, box: BoundingBox, size: int) -> np.ndarray:
    """Foreground pixels of the ROI resized to ``size x size`` (raw ROI if no foreground)."""
    ys, xs = box.slices()
    crop = gray[ys, xs].astype(np.float64)
    m = mask[ys, xs]
    if m.any():
        crop = crop * m
    return resize_bilinear(crop, (size, size))


def preprocess_sample(sample: LabeledSample, cfg: TrainConfig) -> FeatureSequence:
    sid = sample.sample_id
    try:
        rep = select_representatives(sample.frames, cfg.jump)
        gray = np.stack([to_gray(f) for f in rep.frames])
        _, opened = segment_clip(gray, cfg.seed, cfg.bgs_init, **cfg.bgs_kwargs())
        rois, crops, hogs = [], [], []
        for t in range(len(rep)):
            box = extract_roi(opened[t])
            crop = silhouette_crop(gray[t], opened[t], box, cfg.roi_size)
            rois.append(box)
            crops.append(crop / 255.0)
            hogs.append(hog_descriptor(crop, cfg.hog).values)
        skel = None
        if sample.skeleton is not None:
            skel = skeleton_to_image(align_skeleton(sample.skeleton, rep.indices), cfg.skeleton_frames)
    except DataError as exc:
        raise DataError(f"{sid}: {exc}") from exc
    return FeatureSequence(
        sample_id=sid, label=sample.label, frame_indices=rep.indices.copy(),
        crops=np.stack(crops), hog=np.stack(hogs), rois=rois, masks=opened, skeleton=skel,
        nominal_rate=sample.frames.nominal_rate, n_source_frames=len(sample.frames),
    )


def _job(args):
    sample, cfg = args
    return preprocess_sample(sample, cfg)


def preprocess_dataset(samples, cfg: TrainConfig, workers: int | None = None) -> list[FeatureSequence]:
    """Preprocess in dataset order; results do not depend on ``workers``."""
    samples = list(samples)
    workers = cfg.workers if workers is None else workers
    if workers <= 1 or len(samples) < 2:
        return [preprocess_sample(s, cfg) for s in samples]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_job, [(s, cfg) for s in samples]))
