"""Speed/accuracy trade-off over frame jumps on synthetic 24-frame clips.

    python3 scripts/jump_benchmark.py [--jumps 4 6 8] [--samples 10] [--out benchmark.csv]
"""

import argparse
from pathlib import Path

from frdl.harness import TrainConfig
from frdl.harness.benchmark import benchmark_csv, benchmark_jump
from frdl.ingest import generate_synthetic_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--jumps", type=int, nargs="+", default=[4, 6, 8])
    ap.add_argument("--samples", type=int, default=10, help="clips per class")
    ap.add_argument("--frames", type=int, default=24)
    ap.add_argument("--epochs", type=int, default=10)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()

    ds = generate_synthetic_dataset(3, args.samples, args.frames, 64, 0.0, seed=args.seed)
    rows = benchmark_jump(TrainConfig(seed=args.seed, epochs=args.epochs), ds, args.jumps)
    for r in rows:
        print(f"J={r.jump}: {r.frames_per_clip:.1f} frames/clip, {r.seconds_per_clip:.4f} s/clip, "
              f"{r.seconds_per_second:.4f} s per video second, acc {r.accuracy:.3f}")
    table = benchmark_csv(rows)
    if args.out:
        args.out.write_text(table)
    print(table, end="")


if __name__ == "__main__":
    main()
