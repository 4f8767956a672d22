"""Interaction data ingestion, k-core filtering, per-user splitting and degree stats."""
from __future__ import annotations

import collections
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ParseError(ValueError):
    pass


class EmptyInputError(ValueError):
    pass


@dataclass
class RawInteractions:
    """Deduplicated (user_key, item_key) pairs in first-seen order."""

    records: list[tuple[str, str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class SplitConfig:
    ratios: tuple[float, float, float] = (0.7, 0.1, 0.2)
    seed: int = 0
    kcore_min: int = 10

    def validate(self) -> None:
        if any(x <= 0 for x in self.ratios):
            raise ValueError("split ratios must be positive")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ValueError(f"split ratios must sum to 1, got {sum(self.ratios)}")


@dataclass
class InteractionDataset:
    num_users: int
    num_items: int
    train: np.ndarray  # (n, 2) int arrays of dense (u, i)
    val: np.ndarray
    test: np.ndarray
    item_degree: np.ndarray  # training interaction count per item
    user_degree: np.ndarray
    user_train_items: list[np.ndarray]  # sorted item indices per user
    user_keys: list[str] = field(default_factory=list)
    item_keys: list[str] = field(default_factory=list)

    @property
    def num_nodes(self) -> int:
        return self.num_users + self.num_items

    def user_train_sets(self) -> list[set[int]]:
        # cached: rebuilt only if train is replaced (datasets are immutable in practice)
        cached = getattr(self, "_train_sets", None)
        if cached is None:
            cached = [set(items.tolist()) for items in self.user_train_items]
            object.__setattr__(self, "_train_sets", cached)
        return cached

    def sparsity(self) -> float:
        total = len(self.train) + len(self.val) + len(self.test)
        return total / (self.num_users * self.num_items)


def ingest(path: str | Path) -> RawInteractions:
    """Read tab-separated user/item pairs; dedup, keep first-seen order.

    Lines starting with '#' are skipped; columns past the second are ignored.
    """
    path = Path(path)
    seen: set[tuple[str, str]] = set()
    records: list[tuple[str, str]] = []
    nonempty = 0
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line or line.startswith("#"):
                continue
            nonempty += 1
            fields = line.split("\t")
            if len(fields) < 2:
                raise ParseError(f"{path}:{lineno}: expected at least 2 tab-separated fields")
            pair = (fields[0], fields[1])
            if pair not in seen:
                seen.add(pair)
                records.append(pair)
    if nonempty == 0:
        raise EmptyInputError(f"{path}: no interaction lines")
    return RawInteractions(records)


def kcore_filter(raw: RawInteractions, min_count: int) -> RawInteractions:
    """Iteratively peel users/items with fewer than min_count interactions."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    records = list(raw.records)
    while True:
        user_deg = collections.Counter(u for u, _ in records)
        item_deg = collections.Counter(i for _, i in records)
        kept = [
            (u, i)
            for u, i in records
            if user_deg[u] >= min_count and item_deg[i] >= min_count
        ]
        if len(kept) == len(records):
            return RawInteractions(kept)
        records = kept


def split(raw: RawInteractions, cfg: SplitConfig) -> InteractionDataset:
    """Per-user stratified split with dense id remapping.

    Each user's interactions are shuffled and partitioned as
    val = floor(n * val_ratio), test = floor(n * test_ratio), remainder to
    train, so every user retains at least one training interaction.
    """
    cfg.validate()
    if not raw.records:
        raise ValueError("cannot split empty interactions")

    user_ids: dict[str, int] = {}
    item_ids: dict[str, int] = {}
    per_user: list[list[int]] = []
    for u_key, i_key in raw.records:
        if u_key not in user_ids:
            user_ids[u_key] = len(user_ids)
            per_user.append([])
        if i_key not in item_ids:
            item_ids[i_key] = len(item_ids)
        per_user[user_ids[u_key]].append(item_ids[i_key])

    num_users = len(user_ids)
    num_items = len(item_ids)
    rng = np.random.default_rng(cfg.seed)
    _, val_ratio, test_ratio = cfg.ratios

    train_pairs: list[tuple[int, int]] = []
    val_pairs: list[tuple[int, int]] = []
    test_pairs: list[tuple[int, int]] = []
    for u in range(num_users):
        items = np.array(per_user[u], dtype=np.int64)
        rng.shuffle(items)
        n = len(items)
        n_val = int(np.floor(n * val_ratio))
        n_test = int(np.floor(n * test_ratio))
        n_train = n - n_val - n_test
        train_pairs.extend((u, int(i)) for i in items[:n_train])
        val_pairs.extend((u, int(i)) for i in items[n_train : n_train + n_val])
        test_pairs.extend((u, int(i)) for i in items[n_train + n_val :])

    train = np.array(train_pairs, dtype=np.int64).reshape(-1, 2)
    val = np.array(val_pairs, dtype=np.int64).reshape(-1, 2)
    test = np.array(test_pairs, dtype=np.int64).reshape(-1, 2)

    ds = _assemble(num_users, num_items, train, val, test)
    ds.user_keys = list(user_ids)
    ds.item_keys = list(item_ids)
    return ds


def _assemble(
    num_users: int,
    num_items: int,
    train: np.ndarray,
    val: np.ndarray,
    test: np.ndarray,
) -> InteractionDataset:
    item_degree = np.bincount(train[:, 1], minlength=num_items)
    user_degree = np.bincount(train[:, 0], minlength=num_users)
    order = np.lexsort((train[:, 1], train[:, 0]))
    sorted_train = train[order]
    boundaries = np.searchsorted(sorted_train[:, 0], np.arange(num_users + 1))
    user_train_items = [
        sorted_train[boundaries[u] : boundaries[u + 1], 1] for u in range(num_users)
    ]
    return InteractionDataset(
        num_users=num_users,
        num_items=num_items,
        train=train,
        val=val,
        test=test,
        item_degree=item_degree,
        user_degree=user_degree,
        user_train_items=user_train_items,
    )


def synth_powerlaw(
    num_users: int,
    num_items: int,
    interactions_per_user: int,
    zipf_exponent: float,
    seed: int,
) -> RawInteractions:
    """Generate long-tail interaction data: item pick probability ~ rank^-exponent."""
    if num_users <= 0 or num_items <= 0 or interactions_per_user <= 0:
        raise ValueError("counts must be positive")
    if zipf_exponent < 0:
        raise ValueError("zipf_exponent must be >= 0")
    if interactions_per_user > num_items:
        raise ValueError(
            f"cannot draw {interactions_per_user} distinct items from {num_items}"
        )
    rng = np.random.default_rng(seed)
    ranks = np.arange(1, num_items + 1, dtype=np.float64)
    probs = ranks**-zipf_exponent
    probs /= probs.sum()
    records = []
    for u in range(num_users):
        items = rng.choice(num_items, size=interactions_per_user, replace=False, p=probs)
        records.extend((f"u{u}", f"i{int(i)}") for i in items)
    return RawInteractions(records)


def write_splits(ds: InteractionDataset, out_dir: str | Path) -> None:
    """Write train/val/test tsv files, id maps and the stats table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, pairs in (("train", ds.train), ("val", ds.val), ("test", ds.test)):
        with (out_dir / f"{name}.tsv").open("w", encoding="utf-8") as fh:
            for u, i in pairs:
                fh.write(f"{u}\t{i}\n")
    for name, keys in (("idmap_users", ds.user_keys), ("idmap_items", ds.item_keys)):
        with (out_dir / f"{name}.tsv").open("w", encoding="utf-8") as fh:
            for dense_id, key in enumerate(keys):
                fh.write(f"{dense_id}\t{key}\n")
    with (out_dir / "stats.tsv").open("w", encoding="utf-8") as fh:
        fh.write("num_users\tnum_items\ttrain\tval\ttest\tsparsity\n")
        fh.write(
            f"{ds.num_users}\t{ds.num_items}\t{len(ds.train)}\t{len(ds.val)}"
            f"\t{len(ds.test)}\t{ds.sparsity():.6g}\n"
        )


def read_splits(split_dir: str | Path) -> InteractionDataset:
    split_dir = Path(split_dir)

    def read_pairs(name: str) -> np.ndarray:
        rows = []
        with (split_dir / f"{name}.tsv").open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    u, i = line.split("\t")
                    rows.append((int(u), int(i)))
        return np.array(rows, dtype=np.int64).reshape(-1, 2)

    def read_keys(name: str) -> list[str]:
        keys = []
        with (split_dir / f"{name}.tsv").open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line:
                    keys.append(line.split("\t")[1])
        return keys

    user_keys = read_keys("idmap_users")
    item_keys = read_keys("idmap_items")
    ds = _assemble(
        len(user_keys),
        len(item_keys),
        read_pairs("train"),
        read_pairs("val"),
        read_pairs("test"),
    )
    ds.user_keys = user_keys
    ds.item_keys = item_keys
    return ds
