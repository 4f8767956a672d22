"""Graph collaborative-filtering lab with tunable degree normalization."""

from .baselines import BaselineConfig, BaselineKind
from .dataset import InteractionDataset, RawInteractions, SplitConfig
from .models import Backbone, EmbeddingTable, ModelSpec
from .training import TrainConfig

__all__ = [
    "Backbone",
    "BaselineConfig",
    "BaselineKind",
    "EmbeddingTable",
    "InteractionDataset",
    "ModelSpec",
    "RawInteractions",
    "SplitConfig",
    "TrainConfig",
]
