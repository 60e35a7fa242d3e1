"""Frame-jump speed/accuracy benchmark."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, replace

import numpy as np
from threadpoolctl import threadpool_limits

from frdl.harness.config import TrainConfig
from frdl.harness.evaluate import evaluate_features
from frdl.harness.preprocess import preprocess_dataset, preprocess_sample
from frdl.harness.train import fit, num_joints
from frdl.ingest import Dataset, split_dataset
from frdl.net.model import forward

COLUMNS = ("Methods", "Frame Jump", "Average time (S)", "Average Acc. %")

# published FR-DL rows, echoed next to measurements for comparison only
PUBLISHED_REFERENCE = (("4", "2.10", "95.62"), ("6", "1.6", "93.9"), ("8", "1.10", "89.6"))


@dataclass
class BenchmarkRow:
    jump: int
    seconds_per_second: float  # processing time per 1 s of input video
    accuracy: float
    seconds_per_clip: float = 0.0
    frames_per_clip: float = 0.0


def _run_clip(sample, cfg, net_config, params) -> float:
    t0 = time.perf_counter()
    feat = preprocess_sample(sample, cfg)
    forward(net_config, params, feat.to_input("skeleton" in net_config.fusion))
    return time.perf_counter() - t0


def time_clip(sample, cfg, net_config, params, repeats: int = 3) -> float:
    """Best-of-``repeats`` wall time for preprocessing plus a forward pass."""
    return min(_run_clip(sample, cfg, net_config, params) for _ in range(repeats))


def benchmark_jump(cfg: TrainConfig, dataset: Dataset, jumps, repeats: int = 3) -> list[BenchmarkRow]:
    """Train and evaluate once per jump, then time every clip of ``dataset`` single-threaded.

    Timing runs after all training and interleaves the jumps clip by clip, so
    drift in machine load hits every jump alike; each clip keeps its best of
    ``repeats``.
    """
    jumps = list(jumps)
    if not jumps:
        raise ValueError("need at least one frame jump")
    train_set, val_set, test_set = split_dataset(dataset, cfg.split, cfg.seed)
    models, accuracy, frames = [], [], []
    for j in jumps:
        c = replace(cfg, jump=int(j))
        tr = preprocess_dataset(train_set.samples, c)
        va = preprocess_dataset(val_set.samples, c)
        te = preprocess_dataset(test_set.samples, c)
        net_config = c.network_config(dataset.num_classes, num_joints(tr))
        result = fit(c, net_config, tr, va)
        metrics, _ = evaluate_features(net_config, result.params, result.gallery, c.knn, te,
                                       dataset.class_names)
        models.append((c, net_config, result.params))
        accuracy.append(metrics.accuracy)
        frames.append(float(np.mean([len(f) for f in te])))

    per_clip = np.full((len(jumps), len(dataset)), np.inf)
    with threadpool_limits(limits=1):
        for i, sample in enumerate(dataset):
            for _ in range(repeats):
                for m, model in enumerate(models):
                    per_clip[m, i] = min(per_clip[m, i], _run_clip(sample, *model))
    video_seconds = np.array([len(s.frames) / s.frames.nominal_rate for s in dataset])
    return [
        BenchmarkRow(
            jump=int(j), seconds_per_second=float((per_clip[m] / video_seconds).mean()),
            accuracy=accuracy[m], seconds_per_clip=float(per_clip[m].mean()), frames_per_clip=frames[m],
        )
        for m, j in enumerate(jumps)
    ]


def benchmark_csv(rows: list[BenchmarkRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow(["FR-DL (measured)", r.jump, f"{r.seconds_per_second:.4f}", f"{100 * r.accuracy:.2f}"])
    for j, t, acc in PUBLISHED_REFERENCE:
        w.writerow(["FR-DL [published reference]", j, t, acc])
    return buf.getvalue()
