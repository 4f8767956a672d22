"""Forward/backward propagation for the three backbones and score prediction.

Backbones differ only in self-loop policy and layer combination:
MF uses the raw embeddings, the averaged-layer backbone (no self-loops)
averages E^(0)..E^(L), the concatenating backbone (with self-loops)
concatenates them column-wise.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .sparsegraph import NormalizedAdjacency, spmm


class Backbone(enum.Enum):
    MF = "mf"
    LIGHTGCN = "lightgcn"
    LRGCCF = "lrgccf"


@dataclass
class ModelSpec:
    backbone: Backbone
    layers: int = 0
    r: float = 0.5
    embed_dim: int = 64

    def __post_init__(self) -> None:
        if isinstance(self.backbone, str):
            self.backbone = Backbone(self.backbone.lower())
        if self.backbone is Backbone.MF:
            self.layers = 0
        if self.layers < 0:
            raise ValueError("layers must be >= 0")

    @property
    def self_loops(self) -> bool:
        return self.backbone is Backbone.LRGCCF

    @property
    def combined_dim(self) -> int:
        if self.backbone is Backbone.LRGCCF:
            return self.embed_dim * (self.layers + 1)
        return self.embed_dim


@dataclass
class EmbeddingTable:
    E0: np.ndarray  # (|U|+|I|) x d, float64

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(self.E0.copy())


@dataclass
class ForwardCache:
    per_layer: list[np.ndarray]
    combined: np.ndarray


def init_embeddings(num_nodes: int, embed_dim: int, seed: int) -> EmbeddingTable:
    """Xavier-uniform initialization with fan_in = fan_out = embed_dim."""
    bound = np.sqrt(6.0 / (2 * embed_dim))
    rng = np.random.default_rng(seed)
    return EmbeddingTable(
        rng.uniform(-bound, bound, size=(num_nodes, embed_dim)).astype(np.float64)
    )


def forward(
    spec: ModelSpec,
    P: NormalizedAdjacency | None,
    table: EmbeddingTable,
) -> ForwardCache:
    layers = [table.E0]
    if spec.backbone is not Backbone.MF:
        assert P is not None, "graph backbones require a propagation operator"
        if P.size != table.E0.shape[0]:
            raise ValueError("operator size does not match embedding table")
        for _ in range(spec.layers):
            layers.append(spmm(P.forward, layers[-1]))
    if spec.backbone is Backbone.LRGCCF:
        combined = np.concatenate(layers, axis=1)
    elif spec.backbone is Backbone.LIGHTGCN:
        combined = sum(layers) / (spec.layers + 1)
    else:
        combined = layers[0]
    return ForwardCache(per_layer=layers, combined=combined)


def predict(cache: ForwardCache, num_users: int, u: int, i: int) -> float:
    n = cache.combined.shape[0]
    if not (0 <= u < num_users and 0 <= num_users + i < n):
        raise IndexError(f"index out of range: u={u}, i={i}")
    return float(cache.combined[u] @ cache.combined[num_users + i])


def scores(cache: ForwardCache, num_users: int) -> np.ndarray:
    """All user-item dot products as a |U| x |I| matrix."""
    return cache.combined[:num_users] @ cache.combined[num_users:].T


def backward(
    spec: ModelSpec,
    P: NormalizedAdjacency | None,
    grad_combined: np.ndarray,
) -> np.ndarray:
    """Chain grad on the combined embeddings back to E^(0).

    Averaged layers: dE0 = (1/(L+1)) sum_l (P^T)^l G.
    Concatenation: dE0 = sum_l (P^T)^l G_l, Horner from the deepest block.
    """
    if spec.backbone is Backbone.MF or spec.layers == 0:
        if grad_combined.shape[1] != spec.combined_dim:
            raise ValueError("gradient shape does not match combined embeddings")
        return grad_combined.copy()
    assert P is not None
    if grad_combined.shape != (P.size, spec.combined_dim):
        raise ValueError("gradient shape does not match combined embeddings")
    L, d = spec.layers, spec.embed_dim
    if spec.backbone is Backbone.LRGCCF:
        acc = grad_combined[:, L * d : (L + 1) * d].copy()
        for layer in range(L - 1, -1, -1):
            acc = spmm(P.backward, acc) + grad_combined[:, layer * d : (layer + 1) * d]
        return acc
    acc = grad_combined.copy()
    total = grad_combined.copy()
    for _ in range(L):
        acc = spmm(P.backward, acc)
        total += acc
    return total / (L + 1)


_CKPT_MAGIC = b"ADJNORM-CKPT1\n"


def save_checkpoint(path: str | Path, spec: ModelSpec, table: EmbeddingTable, seed: int) -> None:
    """Binary dump: magic, ASCII dims/spec header line, row-major float64 payload."""
    rows, cols = table.E0.shape
    header = (
        f"{rows} {cols} {spec.backbone.value} {spec.layers} "
        f"{spec.r!r} {spec.embed_dim} {seed}\n"
    ).encode("ascii")
    with Path(path).open("wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(table.E0, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> tuple[ModelSpec, EmbeddingTable, int]:
    with Path(path).open("rb") as fh:
        if fh.read(len(_CKPT_MAGIC)) != _CKPT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        parts = fh.read(hlen).decode("ascii").split()
        rows, cols = int(parts[0]), int(parts[1])
        spec = ModelSpec(
            backbone=Backbone(parts[2]),
            layers=int(parts[3]),
            r=float(parts[4]),
            embed_dim=int(parts[5]),
        )
        seed = int(parts[6])
        data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
    table = EmbeddingTable(data.reshape(rows, cols).astype(np.float64))
    return spec, table, seed
