"""Train and evaluate on the synthetic 3-class dataset, printing per-epoch history.

    python3 scripts/desk_experiment.py [--seed 7] [--epochs 30] [--jump 6] [--out runs/desk]
"""

import argparse
import time
from pathlib import Path

from frdl.harness import TrainConfig, evaluate_features, fit, preprocess_dataset
from frdl.harness.train import num_joints
from frdl.ingest import generate_synthetic_dataset, split_dataset
from frdl.net import save_checkpoint


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--jump", type=int, default=6)
    ap.add_argument("--samples", type=int, default=30, help="clips per class")
    ap.add_argument("--noise", type=float, default=0.0)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()

    t0 = time.perf_counter()
    ds = generate_synthetic_dataset(3, args.samples, 16, 64, args.noise, seed=args.seed)
    cfg = TrainConfig(seed=args.seed, epochs=args.epochs, jump=args.jump)
    tr, va, te = (preprocess_dataset(s.samples, cfg) for s in split_dataset(ds, cfg.split, cfg.seed))
    net = cfg.network_config(ds.num_classes, num_joints(tr))
    result = fit(cfg, net, tr, va)
    for h in result.history:
        print(f"epoch {h['epoch']:3d}  train_loss {h['train_loss']:.4f}  "
              f"val_acc {h['val_acc']:.3f}  val_loss {h['val_loss']:.4f}")
    train_m, _ = evaluate_features(net, result.params, None, cfg.knn, tr, ds.class_names)
    test_m, cm = evaluate_features(net, result.params, result.gallery, cfg.knn, te, ds.class_names)
    print(f"best epoch {result.best_epoch}; train acc {train_m.accuracy:.3f}; test acc {test_m.accuracy:.3f}; "
          f"{time.perf_counter() - t0:.1f}s")
    print(cm.to_csv(), end="")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        save_checkpoint(result.params, args.out / "model.ckpt", result.gallery)
        (args.out / "metrics.txt").write_text(test_m.to_text())
        (args.out / "confusion.csv").write_text(cm.to_csv())


if __name__ == "__main__":
    main()
