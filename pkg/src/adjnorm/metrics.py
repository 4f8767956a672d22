"""Full-catalog top-K ranking and the four evaluation metrics.

Recall@K and NDCG@K measure accuracy; Nov@K (normalized self-information of
recommended items' popularity) and PRU@K (negated mean Spearman correlation
between item popularity and rank position) measure novelty / popularity bias.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import rankdata

from .dataset import InteractionDataset

log = logging.getLogger(__name__)


@dataclass
class RankingResult:
    users: np.ndarray  # evaluated user indices
    topk: list[np.ndarray]  # per evaluated user, ranked item indices (best first)
    k: int


@dataclass
class MetricsReport:
    recall: float
    ndcg: float
    nov: float
    pru: float
    k: int
    num_evaluated_users: int
    backbone: str = ""
    r: float = 0.5
    layers: int = 0
    seed: int = 0

    def csv_row(self, dataset_name: str) -> str:
        return (
            f"{dataset_name},{self.backbone},{self.r:.12g},{self.layers},{self.seed},"
            f"{self.k},{self.recall:.12g},{self.ndcg:.12g},{self.nov:.12g},"
            f"{self.pru:.12g},{self.num_evaluated_users}"
        )


def _target_sets(ds: InteractionDataset, target: str) -> list[list[int]]:
    pairs = {"val": ds.val, "test": ds.test}[target]
    per_user: list[list[int]] = [[] for _ in range(ds.num_users)]
    for u, i in pairs:
        per_user[u].append(int(i))
    return per_user


def rank_topk(
    combined: np.ndarray,
    ds: InteractionDataset,
    k: int,
    target: str = "test",
    score_adjust: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
    chunk: int = 512,
) -> RankingResult:
    """Rank candidate items (training degree >= 1) for users with target items.

    The user's training items are masked out; validation items stay rankable
    when targeting test. Ties break by ascending item index. score_adjust, if
    given, maps the (users x candidates) score block before masking.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    per_user_targets = _target_sets(ds, target)
    eval_users = np.array(
        [u for u in range(ds.num_users) if per_user_targets[u]], dtype=np.int64
    )
    candidates = np.nonzero(ds.item_degree >= 1)[0]
    item_emb = combined[ds.num_users + candidates]

    topk: list[np.ndarray] = []
    for lo in range(0, len(eval_users), chunk):
        block_users = eval_users[lo : lo + chunk]
        block = combined[block_users] @ item_emb.T
        if score_adjust is not None:
            block = score_adjust(block, candidates)
        for row, u in enumerate(block_users):
            s = block[row].copy()
            excluded = np.searchsorted(candidates, ds.user_train_items[u])
            # train items always have degree >= 1, so they are all candidates
            s[excluded] = -np.inf
            n_rankable = len(candidates) - len(excluded)
            kk = min(k, n_rankable)
            # stable argsort on -s: ties resolve by ascending candidate index
            order = np.argsort(-s, kind="stable")[:kk]
            topk.append(candidates[order])
    return RankingResult(users=eval_users, topk=topk, k=k)


def recall_at_k(
    ranking: RankingResult, ds: InteractionDataset, target: str = "test"
) -> float:
    per_user_targets = _target_sets(ds, target)
    if len(ranking.users) == 0:
        return 0.0
    total = 0.0
    for u, items in zip(ranking.users, ranking.topk):
        truth = set(per_user_targets[u])
        hits = sum(1 for i in items if int(i) in truth)
        total += hits / len(truth)
    return total / len(ranking.users)


def ndcg_at_k(
    ranking: RankingResult, ds: InteractionDataset, target: str = "test"
) -> float:
    per_user_targets = _target_sets(ds, target)
    if len(ranking.users) == 0:
        return 0.0
    total = 0.0
    for u, items in zip(ranking.users, ranking.topk):
        truth = set(per_user_targets[u])
        dcg = sum(
            1.0 / np.log2(pos + 1)
            for pos, i in enumerate(items, start=1)
            if int(i) in truth
        )
        ideal = min(ranking.k, len(truth))
        idcg = sum(1.0 / np.log2(pos + 1) for pos in range(1, ideal + 1))
        total += dcg / idcg
    return total / len(ranking.users)


def nov_at_k(ranking: RankingResult, ds: InteractionDataset) -> float:
    """Mean normalized self-information -log2(d_i/|U|)/log2|U| of ranked items."""
    if len(ranking.users) == 0:
        return 0.0
    num_users = ds.num_users
    norm = np.log2(num_users)
    total = 0.0
    for items in ranking.topk:
        deg = ds.item_degree[items].astype(np.float64)
        if np.any(deg < 1):
            log.warning("ranked item with zero training degree; treating degree as 1")
            deg = np.maximum(deg, 1.0)
        total += float(np.sum(-np.log2(deg / num_users) / norm))
    return total / (len(ranking.users) * ranking.k)


def spearman(x, y) -> float:
    """Rank correlation with average ranks over ties; 0 if either side is constant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y):
        raise ValueError("inputs must have equal length")
    if len(x) < 2:
        raise ValueError("need at least 2 observations")
    rx = rankdata(x, method="average")
    ry = rankdata(y, method="average")
    sx, sy = rx.std(), ry.std()
    if sx == 0.0 or sy == 0.0:
        return 0.0
    return float(np.mean((rx - rx.mean()) * (ry - ry.mean())) / (sx * sy))


def pru_at_k(ranking: RankingResult, ds: InteractionDataset) -> float:
    """Negated mean Spearman correlation of item popularity vs rank position."""
    if len(ranking.users) == 0:
        return 0.0
    total = 0.0
    for items in ranking.topk:
        if len(items) < 2:
            continue  # correlation undefined; same convention as constant lists
        deg = ds.item_degree[items].astype(np.float64)
        positions = np.arange(1, len(items) + 1, dtype=np.float64)
        total += spearman(deg, positions)
    return -total / len(ranking.users)


def evaluate(
    combined: np.ndarray,
    ds: InteractionDataset,
    k: int,
    target: str = "test",
    score_adjust: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
) -> MetricsReport:
    ranking = rank_topk(combined, ds, k, target=target, score_adjust=score_adjust)
    return MetricsReport(
        recall=recall_at_k(ranking, ds, target=target),
        ndcg=ndcg_at_k(ranking, ds, target=target),
        nov=nov_at_k(ranking, ds),
        pru=pru_at_k(ranking, ds),
        k=k,
        num_evaluated_users=len(ranking.users),
    )
