"""Novelty baselines: popularity-compensated re-ranking plus the config surface
for negative-sampling and degree-proportional edge dropping (which live in the
training and sparsegraph modules respectively)."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class BaselineKind(enum.Enum):
    NONE = "none"
    NS = "ns"
    DEGDROP = "degdrop"
    PC = "pc"


@dataclass
class BaselineConfig:
    kind: BaselineKind = BaselineKind.NONE
    alpha: float = 0.0

    def __post_init__(self) -> None:
        if isinstance(self.kind, str):
            self.kind = BaselineKind(self.kind.lower())
        if self.kind in (BaselineKind.NS, BaselineKind.DEGDROP):
            if not 0.0 <= self.alpha <= 1.0:
                raise ValueError(f"{self.kind.value} alpha must be in [0, 1]")
        elif self.alpha < 0:
            raise ValueError("alpha must be >= 0")


def pc_adjust(
    scores: np.ndarray, item_degree: np.ndarray, alpha: float
) -> np.ndarray:
    """Per-user popularity compensation on raw scores.

    Scores are standardized over the candidate axis (left unchanged when the
    variance is 0), then each item gets a boost alpha * (1 - d_i / d_max).
    Monotone in the raw score per item; alpha = 0 preserves the ranking.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    if scores.shape[1] < 2:
        raise ValueError("need at least 2 candidate items")
    mean = scores.mean(axis=1, keepdims=True)
    std = scores.std(axis=1, keepdims=True)
    z = np.where(std > 0, (scores - mean) / np.where(std > 0, std, 1.0), scores)
    d_max = float(item_degree.max())
    compensation = alpha * (1.0 - item_degree.astype(np.float64) / d_max)
    return z + compensation[None, :]
