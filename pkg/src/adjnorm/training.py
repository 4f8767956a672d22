"""BPR triple sampling, softplus pairwise loss, Adam updates and the training loop."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from . import metrics
from .dataset import InteractionDataset
from .models import (
    Backbone,
    EmbeddingTable,
    ForwardCache,
    ModelSpec,
    backward,
    forward,
    init_embeddings,
)
from .sparsegraph import build_adjacency, drop_edges_degdrop, normalize_r

if TYPE_CHECKING:
    from .baselines import BaselineConfig

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    l2_lambda: float = 1e-4
    batch_size: int = 2048
    max_epochs: int = 1000
    eval_every: int = 5
    patience: int = 5
    neg_alpha: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be >= 0")
        if min(self.batch_size, self.eval_every, self.patience) < 1:
            raise ValueError("counts must be positive")
        if self.neg_alpha < 0:
            raise ValueError("neg_alpha must be >= 0")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, E0: np.ndarray) -> "AdamState":
        return cls(m=np.zeros_like(E0), v=np.zeros_like(E0))


@dataclass
class TrainLogEntry:
    epoch: int
    loss: float
    val_recall: float | None
    elapsed_ms: float


def sample_batch(
    ds: InteractionDataset,
    n: int,
    neg_alpha: float,
    rng: np.random.Generator,
    max_rejections: int = 100,
) -> np.ndarray:
    """Draw (u, i, j) triples: uniform positives, negatives ~ d_j^neg_alpha.

    With neg_alpha = 0 every item is a candidate; otherwise only items with
    training degree >= 1. Negatives already interacted with are rejected and
    resampled; a triple still unresolved after max_rejections rounds is
    dropped with a warning.
    """
    if n < 1:
        raise ValueError("batch size must be >= 1")
    pos_idx = rng.integers(0, len(ds.train), size=n)
    users = ds.train[pos_idx, 0]
    positives = ds.train[pos_idx, 1]

    if neg_alpha == 0.0:
        candidates = np.arange(ds.num_items)
        probs = None
    else:
        candidates = np.nonzero(ds.item_degree >= 1)[0]
        weights = ds.item_degree[candidates].astype(np.float64) ** neg_alpha
        probs = weights / weights.sum()

    train_sets = ds.user_train_sets()
    negatives = np.empty(n, dtype=np.int64)
    pending = np.arange(n)
    for _ in range(max_rejections):
        if len(pending) == 0:
            break
        draws = rng.choice(candidates, size=len(pending), p=probs)
        negatives[pending] = draws
        still = np.array(
            [draws[k] in train_sets[users[pending[k]]] for k in range(len(pending))],
            dtype=bool,
        )
        pending = pending[still]
    if len(pending) > 0:
        log.warning(
            "dropping %d triples whose users exhausted negative candidates", len(pending)
        )
        keep = np.ones(n, dtype=bool)
        keep[pending] = False
        users, positives, negatives = users[keep], positives[keep], negatives[keep]
    return np.stack([users, positives, negatives], axis=1)


def softplus(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def bpr_loss_and_grad(
    triples: np.ndarray,
    cache: ForwardCache,
    table: EmbeddingTable,
    l2_lambda: float,
    num_users: int,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean softplus(-y_ui + y_uj) plus L2 on the batch rows of E^(0).

    Returns (loss, grad on combined embeddings, direct L2 grad on E^(0)).
    The L2 grad bypasses propagation: it applies to the raw embeddings of
    the distinct users/items in the batch.
    """
    if len(triples) == 0:
        raise ValueError("empty batch")
    E = cache.combined
    u = triples[:, 0]
    i = triples[:, 1] + num_users
    j = triples[:, 2] + num_users
    eu, ei, ej = E[u], E[i], E[j]
    y_ui = np.einsum("nd,nd->n", eu, ei)
    y_uj = np.einsum("nd,nd->n", eu, ej)
    margin = y_uj - y_ui
    n = len(triples)
    loss = float(softplus(margin).mean())

    s = (sigmoid(margin) / n)[:, None]
    grad_combined = np.zeros_like(E)
    np.add.at(grad_combined, u, -s * (ei - ej))
    np.add.at(grad_combined, i, -s * eu)
    np.add.at(grad_combined, j, s * eu)

    grad_l2 = np.zeros_like(table.E0)
    if l2_lambda > 0:
        rows = np.unique(np.concatenate([u, i, j]))
        loss += float(l2_lambda * np.sum(table.E0[rows] ** 2))
        grad_l2[rows] = 2.0 * l2_lambda * table.E0[rows]
    return loss, grad_combined, grad_l2


def adam_step(
    state: AdamState,
    table: EmbeddingTable,
    grad_E0: np.ndarray,
    learning_rate: float,
) -> None:
    """Bias-corrected Adam; only rows with a nonzero gradient are touched."""
    if grad_E0.shape != table.E0.shape:
        raise ValueError("gradient shape does not match embedding table")
    if not np.all(np.isfinite(grad_E0)):
        raise FloatingPointError("non-finite gradient; aborting optimizer step")
    state.t += 1
    rows = np.nonzero(np.any(grad_E0 != 0.0, axis=1))[0]
    if len(rows) == 0:
        return
    g = grad_E0[rows]
    state.m[rows] = state.beta1 * state.m[rows] + (1 - state.beta1) * g
    state.v[rows] = state.beta2 * state.v[rows] + (1 - state.beta2) * g**2
    m_hat = state.m[rows] / (1 - state.beta1**state.t)
    v_hat = state.v[rows] / (1 - state.beta2**state.t)
    table.E0[rows] -= learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)


def _validation_recall(
    spec: ModelSpec,
    P,
    table: EmbeddingTable,
    ds: InteractionDataset,
    k: int = 20,
) -> float:
    cache = forward(spec, P, table)
    ranking = metrics.rank_topk(cache.combined, ds, k, target="val")
    return metrics.recall_at_k(ranking, ds, target="val")


def train(
    ds: InteractionDataset,
    spec: ModelSpec,
    cfg: TrainConfig,
    baseline: "BaselineConfig | None" = None,
) -> tuple[EmbeddingTable, list[TrainLogEntry]]:
    """Mini-batch BPR training with early stopping on validation Recall@20.

    Returns the snapshot with the best validation recall (never the last
    table) and the per-evaluation training log.
    """
    from .baselines import BaselineConfig, BaselineKind

    cfg.validate()
    if len(ds.val) == 0:
        raise ValueError("training requires a nonempty validation split")
    baseline = baseline or BaselineConfig(BaselineKind.NONE, 0.0)

    neg_alpha = baseline.alpha if baseline.kind is BaselineKind.NS else cfg.neg_alpha
    degdrop = baseline.kind is BaselineKind.DEGDROP and baseline.alpha > 0

    base_adj = None
    P = None
    if spec.backbone is not Backbone.MF:
        base_adj = build_adjacency(ds, self_loops=spec.self_loops)
        P = normalize_r(base_adj, spec.r)
    if degdrop:
        # DegDrop operates on the loop-free adjacency; resampled per epoch.
        base_adj = build_adjacency(ds, self_loops=False)

    rng = np.random.default_rng(cfg.seed)
    table = init_embeddings(ds.num_nodes, spec.embed_dim, cfg.seed)
    opt = AdamState.zeros_like(table.E0)

    best_table = table.copy()
    best_recall = -np.inf
    bad_evals = 0
    entries: list[TrainLogEntry] = []
    batches_per_epoch = max(1, int(np.ceil(len(ds.train) / cfg.batch_size)))
    start = time.monotonic()

    for epoch in range(1, cfg.max_epochs + 1):
        if degdrop:
            dropped = drop_edges_degdrop(
                base_adj, ds.num_users, baseline.alpha, seed=int(rng.integers(2**31))
            )
            P = normalize_r(dropped, spec.r)
        epoch_loss = 0.0
        for _ in range(batches_per_epoch):
            triples = sample_batch(ds, cfg.batch_size, neg_alpha, rng)
            cache = forward(spec, P, table)
            loss, grad_combined, grad_l2 = bpr_loss_and_grad(
                triples, cache, table, cfg.l2_lambda, ds.num_users
            )
            grad_E0 = backward(spec, P, grad_combined) + grad_l2
            adam_step(opt, table, grad_E0, cfg.learning_rate)
            epoch_loss += loss
        epoch_loss /= batches_per_epoch

        if epoch % cfg.eval_every == 0:
            recall = _validation_recall(spec, P, table, ds)
            entries.append(
                TrainLogEntry(
                    epoch=epoch,
                    loss=epoch_loss,
                    val_recall=recall,
                    elapsed_ms=(time.monotonic() - start) * 1e3,
                )
            )
            if recall > best_recall:
                best_recall = recall
                best_table = table.copy()
                bad_evals = 0
            else:
                bad_evals += 1
                if bad_evals >= cfg.patience:
                    break
        else:
            entries.append(
                TrainLogEntry(
                    epoch=epoch,
                    loss=epoch_loss,
                    val_recall=None,
                    elapsed_ms=(time.monotonic() - start) * 1e3,
                )
            )
    return best_table, entries


def write_training_log(entries: list[TrainLogEntry], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss,val_recall@20,elapsed_ms\n")
        for e in entries:
            recall = "" if e.val_recall is None else f"{e.val_recall:.12g}"
            fh.write(f"{e.epoch},{e.loss:.12g},{recall},{e.elapsed_ms:.1f}\n")
