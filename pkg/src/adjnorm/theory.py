"""Propagation-limit verification on small graphs.

For a connected graph with self-loops added, repeated application of the
degree-normalized operator D^-r A D^-(1-r) converges to a closed-form rank-one
limit whose (i, j) entry is (d_i+1)^(1-r) (d_j+1)^r / (2|E|+|V|). The limit's
dot-product structure flips preference between high- and low-degree nodes at
r = 1; the checks here verify both facts numerically.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .sparsegraph import NormalizedAdjacency, SparseMatrixCSR, normalize_r

NOT_CONVERGED = -1
DENSE_CAP = 200


@dataclass
class LimitMatrix:
    matrix: np.ndarray
    r: float
    denominator: float  # 2|E| + |V|
    degrees: np.ndarray  # degrees excluding the added self-loop


@dataclass
class OrderingReport:
    r: float
    case: int  # 1: r<1 favors high degree, 2: r=1 neutral, 3: r>1 favors low degree
    triples_checked: int
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.triples_checked > 0


def _check_connected(adj: SparseMatrixCSR) -> None:
    n = adj.num_rows
    ncomp, _ = sp.csgraph.connected_components(adj.to_scipy(), directed=False)
    if n > 0 and ncomp != 1:
        raise ValueError(f"graph is not connected ({ncomp} components)")


def add_self_loops(adj: SparseMatrixCSR) -> SparseMatrixCSR:
    m = adj.to_scipy() + sp.eye(adj.num_rows, format="csr")
    m.data[:] = 1.0
    return SparseMatrixCSR.from_scipy(m)


def limit_matrix(adj_no_loops: SparseMatrixCSR, r: float) -> LimitMatrix:
    if adj_no_loops.to_scipy().diagonal().any():
        raise ValueError("input adjacency must not contain self-loops")
    _check_connected(adj_no_loops)
    deg = adj_no_loops.row_nnz().astype(np.float64)
    n = adj_no_loops.num_rows
    denom = adj_no_loops.nnz + n  # 2|E| + |V|
    col = (deg + 1.0) ** (1.0 - r)
    row = (deg + 1.0) ** r
    return LimitMatrix(
        matrix=np.outer(col, row) / denom,
        r=r,
        denominator=float(denom),
        degrees=deg,
    )


def power_iterate(P: NormalizedAdjacency, l: int, dense_cap: int = DENSE_CAP) -> np.ndarray:
    """Dense P^l by repeated multiplication; l = 0 is the identity."""
    if l < 0:
        raise ValueError("l must be >= 0")
    if P.size > dense_cap:
        raise ValueError(f"graph size {P.size} exceeds dense cap {dense_cap}")
    dense = P.forward.to_dense()
    out = np.eye(P.size)
    for _ in range(l):
        out = dense @ out
    return out


def convergence_check(
    adj_no_loops: SparseMatrixCSR,
    r: float,
    tol: float,
    l_max: int,
    dense_cap: int = DENSE_CAP,
) -> tuple[int, float]:
    """Smallest l with max-abs error below tol vs the closed-form limit.

    Returns (l_star, final_error); l_star is NOT_CONVERGED if l_max steps
    do not suffice.
    """
    limit = limit_matrix(adj_no_loops, r).matrix
    if adj_no_loops.num_rows > dense_cap:
        raise ValueError("graph size exceeds dense cap")
    P = normalize_r(add_self_loops(adj_no_loops), r)
    dense = P.forward.to_dense()
    current = np.eye(P.size)
    err = float(np.max(np.abs(current - limit)))
    if err < tol:
        return 0, err
    for l in range(1, l_max + 1):
        current = dense @ current
        err = float(np.max(np.abs(current - limit)))
        if err < tol:
            return l, err
    return NOT_CONVERGED, err


def ordering_check(
    adj_no_loops: SparseMatrixCSR,
    r: float,
    embed_dim: int = 8,
    seed: int = 0,
    zero_tol: float = 1e-12,
) -> OrderingReport:
    """Verify the three dot-product orderings of a fixed random initial matrix
    pushed through the limit operator, over all (i, j, k) with d_j > d_k."""
    lm = limit_matrix(adj_no_loops, r)
    n = adj_no_loops.num_rows
    rng = np.random.default_rng(seed)
    H0 = rng.standard_normal((n, embed_dim))
    H_inf = lm.matrix @ H0
    dots = H_inf @ H_inf.T

    deg = lm.degrees
    case = 2 if r == 1.0 else (1 if r < 1.0 else 3)
    checked = 0
    violations = 0
    for j in range(n):
        for k in range(n):
            if deg[j] <= deg[k]:
                continue
            diff = dots[:, j] - dots[:, k]  # all ego nodes i at once
            checked += n
            if case == 1:
                violations += int(np.sum(diff <= 0))
            elif case == 3:
                violations += int(np.sum(diff >= 0))
            else:
                violations += int(np.sum(np.abs(diff) >= zero_tol))
    if case == 2 and checked == 0:
        # regular graphs have no d_j > d_k pairs; equality must still hold
        diff = dots - dots[:, :1]
        checked = diff.size
        violations = int(np.sum(np.abs(diff) >= zero_tol))
    return OrderingReport(r=r, case=case, triples_checked=checked, violations=violations)


def random_connected_bipartite(
    num_users: int,
    num_items: int,
    extra_edges: int,
    rng: np.random.Generator,
) -> SparseMatrixCSR:
    """Random connected user-item graph without self-loops (spanning chain
    plus random extra edges)."""
    n = num_users + num_items
    edges = set()
    # spanning path alternating sides, then attach leftover nodes across
    users = rng.permutation(num_users)
    items = rng.permutation(num_items) + num_users
    m = min(num_users, num_items)
    path = np.empty(2 * m, dtype=np.int64)
    path[0::2], path[1::2] = users[:m], items[:m]
    for a, b in zip(path[:-1], path[1:]):
        edges.add((min(a, b), max(a, b)))
    for node in users[m:]:
        partner = items[int(rng.integers(m))]
        edges.add((min(node, partner), max(node, partner)))
    for node in items[m:]:
        partner = users[int(rng.integers(m))]
        edges.add((min(node, partner), max(node, partner)))
    for _ in range(extra_edges):
        u = int(rng.integers(num_users))
        i = int(rng.integers(num_items)) + num_users
        edges.add((u, i))
    rows = np.array([e[0] for e in sorted(edges)] + [e[1] for e in sorted(edges)])
    cols = np.array([e[1] for e in sorted(edges)] + [e[0] for e in sorted(edges)])
    return SparseMatrixCSR.from_coo(n, n, rows, cols, np.ones(len(rows)))
