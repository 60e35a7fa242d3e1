"""Command-line entry point.

    frdl synth       --out DIR [--seed N] [--classes C --samples S --frames F --size P --noise X]
    frdl preprocess  --data DIR --out DIR [--config FILE] [--jump J]
    frdl train       --data DIR --checkpoint FILE [--out DIR] [--config FILE] [--jump J] [--seed N]
    frdl eval        --data DIR --checkpoint FILE [--out DIR] [--k K] [--margin-tau T]
    frdl bench-jump  --data DIR [--jump 4 --jump 6 --jump 8] [--out DIR]
    frdl predict     SAMPLE_DIR --checkpoint FILE

Settings resolve as defaults, then ``--config``, then explicit flags.
Exit codes: 0 success, 1 data error, 2 config error, 3 training divergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from frdl.classify import KNN
from frdl.errors import CheckpointError, ConfigError, DataError, DivergenceError, StructureError
from frdl.harness.benchmark import benchmark_csv, benchmark_jump
from frdl.harness.config import TrainConfig, apply_overrides, config_to_text, load_config, parse_config_text
from frdl.harness.evaluate import evaluate_features
from frdl.harness.preprocess import preprocess_dataset, preprocess_sample
from frdl.harness.train import fit, num_joints
from frdl.ingest import (
    generate_synthetic_dataset, load_dataset, load_sample, split_dataset, write_dataset, write_image,
)
from frdl.net.checkpoint import load_checkpoint, save_checkpoint
from frdl.net.model import forward, param_shapes

log = logging.getLogger("frdl")

EXIT_OK, EXIT_DATA, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def sidecar_path(checkpoint) -> Path:
    """Class names, joint count and settings live next to the checkpoint."""
    return Path(str(checkpoint) + ".json")


def _resolve_config(args, base: TrainConfig | None = None) -> TrainConfig:
    cfg = load_config(args.config, base) if getattr(args, "config", None) else (base or TrainConfig())
    flags = {}
    if getattr(args, "seed", None) is not None:
        flags["seed"] = args.seed
    if getattr(args, "jump", None) is not None and not isinstance(args.jump, list):
        flags["jump"] = args.jump
    if getattr(args, "k", None) is not None:
        flags["k"] = args.k
    if getattr(args, "margin_tau", None) is not None:
        flags["margin_tau"] = args.margin_tau
    return apply_overrides(cfg, flags)


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) is None:
            raise ConfigError(f"--{name.replace('_', '-')} is required")


def _load_model(checkpoint, args):
    side = sidecar_path(checkpoint)
    try:
        meta = json.loads(side.read_text())
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read model sidecar {side}: {exc}") from exc
    cfg = _resolve_config(args, parse_config_text(meta["config"]))
    net_config = cfg.network_config(len(meta["class_names"]), meta["num_joints"])
    params, gallery = load_checkpoint(checkpoint, param_shapes(net_config))
    return cfg, net_config, params, gallery, meta["class_names"]


def cmd_synth(args) -> int:
    _require(args, "out")
    ds = generate_synthetic_dataset(args.classes, args.samples, args.frames, args.size, args.noise,
                                    0 if args.seed is None else args.seed)
    write_dataset(ds, args.out)
    print(f"wrote {len(ds)} samples in {ds.num_classes} classes to {args.out}")
    return EXIT_OK


def cmd_preprocess(args) -> int:
    _require(args, "data", "out")
    cfg = _resolve_config(args)
    ds = load_dataset(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    feats = preprocess_dataset(ds.samples, cfg)
    with open(out / "hog.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id", "frame_index", *(f"h{i}" for i in range(cfg.hog_dim()))])
        for f in feats:
            for idx, row in zip(f.frame_indices, f.hog):
                w.writerow([f.sample_id, int(idx), *(f"{v:.8g}" for v in row)])
    for f in feats:
        sdir = out / ds.class_names[f.label] / f.sample_id
        sdir.mkdir(parents=True, exist_ok=True)
        for idx, m in zip(f.frame_indices, f.masks):
            write_image(sdir / f"mask_{int(idx):05d}.pgm", m)
        if f.skeleton is not None:
            write_image(sdir / "skeleton.ppm", f.skeleton.pixels)
    print(f"preprocessed {len(feats)} samples into {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    _require(args, "data", "checkpoint")
    cfg = _resolve_config(args)
    if cfg.learning_rate <= 0:
        raise ConfigError("learning_rate must be > 0 for training")
    ds = load_dataset(args.data)
    train_set, val_set, _ = split_dataset(ds, cfg.split, cfg.seed)
    tr = preprocess_dataset(train_set.samples, cfg)
    va = preprocess_dataset(val_set.samples, cfg)
    joints = num_joints(tr + va)
    net_config = cfg.network_config(ds.num_classes, joints)
    result = fit(cfg, net_config, tr, va)
    ckpt = Path(args.checkpoint)
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result.params, ckpt, result.gallery)
    sidecar_path(ckpt).write_text(json.dumps(
        {"class_names": ds.class_names, "num_joints": joints, "config": config_to_text(cfg)}, indent=2))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "history.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["epoch", "train_loss", "val_acc", "val_loss"])
            w.writeheader()
            w.writerows(result.history)
    print(f"best epoch {result.best_epoch}; checkpoint {ckpt}")
    return EXIT_OK


def cmd_eval(args) -> int:
    _require(args, "data", "checkpoint")
    cfg, net_config, params, gallery, names = _load_model(args.checkpoint, args)
    ds = load_dataset(args.data)
    if list(ds.class_names) != list(names):
        raise DataError(f"dataset classes {ds.class_names} do not match the model's {names}")
    test = split_dataset(ds, cfg.split, cfg.seed)[2] if args.split == "test" else ds
    feats = preprocess_dataset(test.samples, cfg)
    metrics, cm = evaluate_features(net_config, params, gallery, cfg.knn, feats, names)
    text = metrics.to_text()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.txt").write_text(text)
        (out / "confusion.csv").write_text(cm.to_csv())
    sys.stdout.write(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    _require(args, "data")
    cfg = _resolve_config(args)
    if cfg.learning_rate <= 0:
        raise ConfigError("learning_rate must be > 0 for training")
    jumps = args.jump or [4, 6, 8]
    rows = benchmark_jump(cfg, load_dataset(args.data), jumps)
    table = benchmark_csv(rows)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "benchmark.csv").write_text(table)
    sys.stdout.write(table)
    return EXIT_OK


def cmd_predict(args) -> int:
    _require(args, "checkpoint")
    cfg, net_config, params, gallery, names = _load_model(args.checkpoint, args)
    feat = preprocess_sample(load_sample(args.sample_dir), cfg)
    from frdl.classify import route

    probs, trace = forward(net_config, params, feat.to_input("skeleton" in net_config.fusion))
    d = route(probs, trace.embedding, gallery, cfg.knn)
    print(f"label {names[d.label]}")
    print(f"route {d.route}")
    print("probabilities " + " ".join(f"{p:.6f}" for p in np.asarray(probs).ravel()))
    if d.route == KNN:
        print("neighbors " + " ".join(str(i) for i in d.neighbor_ids))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--data", help="dataset root (class/sample/frame_%%05d.pgm)")
    common.add_argument("--config", help="flat key = value settings file")
    common.add_argument("--seed", type=int)
    common.add_argument("--checkpoint", help="model file; a .json sidecar is written next to it")
    common.add_argument("--out", help="output directory")
    common.add_argument("--k", type=int, help="W-KNN neighbour count")
    common.add_argument("--margin-tau", type=float, help="Softmax acceptance margin")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="frdl", description="Frame-jump action recognition pipeline.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    s.add_argument("--classes", type=int, default=3)
    s.add_argument("--samples", type=int, default=30, help="samples per class")
    s.add_argument("--frames", type=int, default=16)
    s.add_argument("--size", type=int, default=64)
    s.add_argument("--noise", type=float, default=0.0)
    s.set_defaults(func=cmd_synth)

    for name, func, helptext in (("preprocess", cmd_preprocess, "write masks, skeleton images and HOG"),
                                 ("train", cmd_train, "train and save a checkpoint")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--jump", type=int)
        s.set_defaults(func=func)

    s = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    s.add_argument("--jump", type=int)
    s.add_argument("--split", choices=("test", "all"), default="test",
                   help="evaluate the held-out test split (default) or every sample")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("bench-jump", parents=[common], help="speed/accuracy per frame jump")
    s.add_argument("--jump", type=int, action="append", help="repeatable; default 4, 6, 8")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("predict", parents=[common], help="classify one sample directory")
    s.add_argument("sample_dir")
    s.add_argument("--jump", type=int)
    s.set_defaults(func=cmd_predict)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DataError, CheckpointError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except StructureError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
