#!/usr/bin/env python3
"""Sweep the normalization exponent r on a synthetic power-law dataset and
plot the accuracy/novelty trade-off.

Writes sweep.csv and sweep.svg under --out alongside the prepared splits.
"""
import argparse
from pathlib import Path

from adjnorm.baselines import BaselineConfig
from adjnorm.config import ExperimentConfig, SynthConfig
from adjnorm.dataset import SplitConfig
from adjnorm.experiments import run_prepare, run_sweep
from adjnorm.models import ModelSpec
from adjnorm.training import TrainConfig


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("runs/tradeoff"))
    parser.add_argument("--users", type=int, default=2000)
    parser.add_argument("--items", type=int, default=1000)
    parser.add_argument("--per-user", type=int, default=10)
    parser.add_argument("--zipf", type=float, default=1.0)
    parser.add_argument("--layers", type=int, default=3)
    parser.add_argument("--epochs", type=int, default=80)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument(
        "--values", type=float, nargs="+", default=[0.5, 0.75, 1.0, 1.25]
    )
    args = parser.parse_args()

    cfg = ExperimentConfig(
        dataset_path=None,
        synth=SynthConfig(args.users, args.items, args.per_user, args.zipf, seed=7),
        split=SplitConfig(seed=7, kcore_min=1),
        model=ModelSpec("lightgcn", layers=args.layers, r=0.5, embed_dim=64),
        train=TrainConfig(max_epochs=args.epochs, eval_every=5, patience=5),
        baseline=BaselineConfig(),
        ks=[20],
        seeds=args.seeds,
        output_dir=args.out,
        dataset_name="synth",
    )
    ds = run_prepare(cfg)
    csv_path = run_sweep(cfg, "r", args.values, ds=ds)
    print(csv_path)
    print(csv_path.with_name("sweep.svg"))


if __name__ == "__main__":
    main()
