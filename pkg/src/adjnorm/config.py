"""Flat-sectioned key/value experiment configuration (INI syntax)."""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .baselines import BaselineConfig
from .dataset import SplitConfig
from .models import ModelSpec
from .training import TrainConfig


@dataclass
class SynthConfig:
    num_users: int
    num_items: int
    interactions_per_user: int
    zipf_exponent: float
    seed: int = 0


@dataclass
class ExperimentConfig:
    dataset_path: str | None
    synth: SynthConfig | None
    split: SplitConfig
    model: ModelSpec
    train: TrainConfig
    baseline: BaselineConfig
    ks: list[int]
    seeds: list[int]
    output_dir: Path
    dataset_name: str = "dataset"

    def validate(self) -> None:
        if self.dataset_path is None and self.synth is None:
            raise ValueError("config needs either dataset.path or synth parameters")
        if self.dataset_path is not None and not Path(self.dataset_path).exists():
            raise FileNotFoundError(f"dataset path does not exist: {self.dataset_path}")
        if not self.seeds:
            raise ValueError("eval.seeds must be nonempty")
        if any(k < 1 for k in self.ks):
            raise ValueError("eval.k values must be >= 1")

    @property
    def split_dir(self) -> Path:
        return self.output_dir / "splits"


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.replace(",", " ").split()]


def _ints(s: str) -> list[int]:
    return [int(x) for x in s.replace(",", " ").split()]


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    cp = configparser.ConfigParser()
    cp.read(path)

    data = cp["dataset"] if cp.has_section("dataset") else {}
    synth = None
    if "synth_users" in data:
        synth = SynthConfig(
            num_users=int(data["synth_users"]),
            num_items=int(data["synth_items"]),
            interactions_per_user=int(data["synth_per_user"]),
            zipf_exponent=float(data.get("synth_zipf", "1.0")),
            seed=int(data.get("synth_seed", "0")),
        )
    split = SplitConfig(
        ratios=(
            float(data.get("train_ratio", "0.7")),
            float(data.get("val_ratio", "0.1")),
            float(data.get("test_ratio", "0.2")),
        ),
        seed=int(data.get("split_seed", "0")),
        kcore_min=int(data.get("kcore_min", "10")),
    )

    model_sec = cp["model"] if cp.has_section("model") else {}
    model = ModelSpec(
        backbone=model_sec.get("backbone", "lightgcn"),
        layers=int(model_sec.get("layers", "2")),
        r=float(model_sec.get("r", "0.5")),
        embed_dim=int(model_sec.get("embed_dim", "64")),
    )

    train_sec = cp["train"] if cp.has_section("train") else {}
    train = TrainConfig(
        learning_rate=float(train_sec.get("learning_rate", "0.001")),
        l2_lambda=float(train_sec.get("l2_lambda", "1e-4")),
        batch_size=int(train_sec.get("batch_size", "2048")),
        max_epochs=int(train_sec.get("max_epochs", "1000")),
        eval_every=int(train_sec.get("eval_every", "5")),
        patience=int(train_sec.get("patience", "5")),
        neg_alpha=float(train_sec.get("neg_alpha", "0")),
    )

    base_sec = cp["baseline"] if cp.has_section("baseline") else {}
    baseline = BaselineConfig(
        kind=base_sec.get("kind", "none"),
        alpha=float(base_sec.get("alpha", "0")),
    )

    eval_sec = cp["eval"] if cp.has_section("eval") else {}
    ks = _ints(eval_sec.get("k", "20"))
    seeds = _ints(eval_sec.get("seeds", "0"))

    out_sec = cp["output"] if cp.has_section("output") else {}
    out_dir = Path(out_sec.get("dir", "runs/default"))

    cfg = ExperimentConfig(
        dataset_path=data.get("path"),
        synth=synth,
        split=split,
        model=model,
        train=train,
        baseline=baseline,
        ks=ks,
        seeds=seeds,
        output_dir=out_dir,
        dataset_name=data.get("name", "synth" if synth else Path(data.get("path", "dataset")).stem),
    )
    return cfg
