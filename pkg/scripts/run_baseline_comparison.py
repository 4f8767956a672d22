#!/usr/bin/env python3
"""Compare the plain backbone against the three novelty baselines
(popularity-weighted negative sampling, degree-proportional edge dropout,
popularity-compensated re-ranking) on one synthetic dataset.
"""
import argparse
from dataclasses import replace
from pathlib import Path

from adjnorm.baselines import BaselineConfig
from adjnorm.config import ExperimentConfig, SynthConfig
from adjnorm.dataset import SplitConfig
from adjnorm.experiments import METRICS_HEADER, run_prepare, run_train_eval
from adjnorm.models import ModelSpec
from adjnorm.training import TrainConfig


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("runs/baselines"))
    parser.add_argument("--alpha", type=float, default=0.5)
    parser.add_argument("--epochs", type=int, default=80)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    args = parser.parse_args()

    cfg = ExperimentConfig(
        dataset_path=None,
        synth=SynthConfig(2000, 1000, 10, 1.0, seed=7),
        split=SplitConfig(seed=7, kcore_min=1),
        model=ModelSpec("lightgcn", layers=2, r=0.5, embed_dim=64),
        train=TrainConfig(max_epochs=args.epochs, eval_every=5, patience=5),
        baseline=BaselineConfig(),
        ks=[20],
        seeds=args.seeds,
        output_dir=args.out,
        dataset_name="synth",
    )
    ds = run_prepare(cfg)
    print(METRICS_HEADER)
    for kind in ("none", "ns", "degdrop", "pc"):
        alpha = 0.0 if kind == "none" else args.alpha
        cell = replace(
            cfg,
            baseline=BaselineConfig(kind=kind, alpha=alpha),
            output_dir=args.out / kind,
        )
        run_train_eval(cell, ds=ds)
        print((cell.output_dir / "metrics.csv").read_text(), end="")


if __name__ == "__main__":
    main()
