"""Bipartite adjacency construction and degree-normalized propagation operators.

The propagation operator is P = D^-r A D^-(1-r): r=0.5 gives the symmetric
normalization, r=1 the left (row-stochastic) form, r=0 the right form.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .dataset import InteractionDataset


@dataclass
class SparseMatrixCSR:
    num_rows: int
    num_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    @property
    def nnz(self) -> int:
        return len(self.col_idx)

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values, self.col_idx, self.row_ptr),
            shape=(self.num_rows, self.num_cols),
        )

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def row_nnz(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    @classmethod
    def from_scipy(cls, m: sp.spmatrix) -> "SparseMatrixCSR":
        m = sp.csr_matrix(m)
        m.sort_indices()
        m.eliminate_zeros()
        return cls(
            num_rows=m.shape[0],
            num_cols=m.shape[1],
            row_ptr=m.indptr.astype(np.int64),
            col_idx=m.indices.astype(np.int64),
            values=m.data.astype(np.float64),
        )

    @classmethod
    def from_coo(
        cls, num_rows: int, num_cols: int, rows, cols, vals
    ) -> "SparseMatrixCSR":
        return cls.from_scipy(
            sp.coo_matrix((vals, (rows, cols)), shape=(num_rows, num_cols))
        )


@dataclass
class NormalizedAdjacency:
    forward: SparseMatrixCSR
    backward: SparseMatrixCSR  # exact transpose of forward
    r: float
    self_loops: bool
    size: int


def build_adjacency(ds: InteractionDataset, self_loops: bool) -> SparseMatrixCSR:
    """Square (|U|+|I|) adjacency; user rows first, items offset by |U|."""
    n = ds.num_nodes
    u = ds.train[:, 0]
    i = ds.train[:, 1] + ds.num_users
    rows = np.concatenate([u, i])
    cols = np.concatenate([i, u])
    if self_loops:
        diag = np.arange(n)
        rows = np.concatenate([rows, diag])
        cols = np.concatenate([cols, diag])
    vals = np.ones(len(rows), dtype=np.float64)
    m = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    m.data[:] = 1.0  # duplicates collapse to binary
    return SparseMatrixCSR.from_scipy(m)


def normalize_r(adj: SparseMatrixCSR, r: float) -> NormalizedAdjacency:
    """Scale each nonzero (a, b) of a binary adjacency to deg(a)^-r deg(b)^-(1-r)."""
    if adj.num_rows != adj.num_cols:
        raise ValueError("adjacency must be square")
    deg = adj.row_nnz().astype(np.float64)
    with np.errstate(divide="ignore"):
        left = np.where(deg > 0, deg ** -r, 0.0)
        right = np.where(deg > 0, deg ** -(1.0 - r), 0.0)
    m = adj.to_scipy().astype(np.float64)
    fwd = sp.diags(left) @ m @ sp.diags(right)
    bwd = fwd.T.tocsr()
    return NormalizedAdjacency(
        forward=SparseMatrixCSR.from_scipy(fwd),
        backward=SparseMatrixCSR.from_scipy(bwd),
        r=r,
        self_loops=bool(m.diagonal().any()),
        size=adj.num_rows,
    )


def spmm(m: SparseMatrixCSR, dense: np.ndarray) -> np.ndarray:
    if dense.shape[0] != m.num_cols:
        raise ValueError(
            f"dimension mismatch: {m.num_rows}x{m.num_cols} @ {dense.shape}"
        )
    return np.asarray(m.to_scipy() @ dense, dtype=np.float64)


def transpose(m: SparseMatrixCSR) -> SparseMatrixCSR:
    return SparseMatrixCSR.from_scipy(m.to_scipy().T.tocsr())


def drop_edges_degdrop(
    adj: SparseMatrixCSR,
    num_users: int,
    alpha: float,
    seed: int,
) -> SparseMatrixCSR:
    """Drop each user-item edge (and its mirror) with probability min(1, alpha/d_i).

    d_i is the item's degree in the given adjacency. Input must be built
    without self-loops; the caller re-normalizes afterwards.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    m = adj.to_scipy().tocoo()
    if m.diagonal().any():
        raise ValueError("DegDrop expects an adjacency without self-loops")
    if alpha == 0.0:
        return adj
    deg = adj.row_nnz().astype(np.float64)
    rng = np.random.default_rng(seed)
    upper = m.row < num_users  # user->item entries; mirror handled jointly
    rows, cols = m.row[upper], m.col[upper]
    p_drop = np.minimum(1.0, alpha / deg[cols])
    keep = rng.random(len(rows)) >= p_drop
    rows, cols = rows[keep], cols[keep]
    all_rows = np.concatenate([rows, cols])
    all_cols = np.concatenate([cols, rows])
    vals = np.ones(len(all_rows), dtype=np.float64)
    return SparseMatrixCSR.from_coo(adj.num_rows, adj.num_cols, all_rows, all_cols, vals)


def dump_matrix(m: SparseMatrixCSR, path: str | Path) -> None:
    """Text dump: `num_rows num_cols nnz` header then `row col value` lines."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"{m.num_rows} {m.num_cols} {m.nnz}\n")
        for row in range(m.num_rows):
            for k in range(m.row_ptr[row], m.row_ptr[row + 1]):
                fh.write(f"{row} {m.col_idx[k]} {m.values[k]:.17g}\n")
