"""Clustering recommender and the true-cluster oracle.

Rows (and, on the transpose, columns) are grouped by their k most similar
peers; the recommendation is an unseen item from the column cluster whose
block, restricted to the user's row cluster, holds the most observed 1s.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from os import PathLike
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment

from paflab import seeding
from paflab.observed import ObservedMatrix
from paflab.paf import Recommendation, _candidates
from paflab.seeding import Seed
from paflab.synthetic import LatentModel


@dataclass(frozen=True, eq=False)
class Partition:
    assignment: np.ndarray
    cluster_count: int
    degenerate: bool = False

    def __post_init__(self):
        a = self.assignment
        if len(a) and (a.min() < 0 or a.max() >= self.cluster_count):
            raise ValueError("cluster ids must lie in [0, cluster_count)")
        if len(np.unique(a)) != self.cluster_count:
            raise ValueError("cluster ids must be dense")

    @classmethod
    def from_labels(cls, labels, degenerate: bool = False) -> "Partition":
        """Relabel arbitrary labels densely in order of first appearance."""
        labels = np.asarray(labels)
        _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
        rank = np.empty(len(first), dtype=np.int64)
        rank[np.argsort(first)] = np.arange(len(first))
        return cls(rank[inverse.ravel()], len(first), degenerate)

    def __len__(self) -> int:
        return len(self.assignment)

    def members(self, cluster_id: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == cluster_id)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.cluster_count)

    def to_text(self) -> str:
        return "".join(f"{i} {c}\n" for i, c in enumerate(self.assignment))

    @classmethod
    def from_text(cls, text: str) -> "Partition":
        pairs = [ln.split() for ln in text.splitlines() if ln.strip()]
        idx = np.array([int(a) for a, _ in pairs], dtype=np.int64)
        cid = np.array([int(b) for _, b in pairs], dtype=np.int64)
        if not np.array_equal(np.sort(idx), np.arange(len(idx))):
            raise ValueError("partition file must list every index exactly once")
        out = np.empty(len(idx), dtype=np.int64)
        out[idx] = cid
        return cls(out, int(out.max()) + 1 if len(out) else 0)

    def save(self, path: Union[str, PathLike]) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(self.to_text())


def similarity_matrix(y: ObservedMatrix) -> np.ndarray:
    """Dense row-by-row agreement counts."""
    s = y.ones @ y.ones.T + y.zeros @ y.zeros.T
    return np.asarray(s.toarray(), dtype=np.int64)


def _knn(sim: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    # k nearest per row, self first; ties broken by a shared random order.
    n = len(sim)
    s = sim.astype(float)
    np.fill_diagonal(s, np.inf)
    tiebreak = rng.permutation(n)
    order = np.lexsort((np.broadcast_to(tiebreak, s.shape), -s), axis=1)
    return order[:, :k]


def _greedy_groups(affinity: np.ndarray, cohesion: np.ndarray, k: int) -> np.ndarray:
    # Most cohesive unassigned index seeds a group with its k-1 closest unassigned peers.
    n = len(affinity)
    labels = np.full(n, -1, dtype=np.int64)
    next_id = 0
    for s in np.argsort(-cohesion, kind="stable"):
        if labels[s] >= 0:
            continue
        free = np.flatnonzero(labels < 0)
        free = free[free != s]
        closest = free[np.argsort(-affinity[s, free], kind="stable")[: k - 1]]
        labels[s] = next_id
        labels[closest] = next_id
        next_id += 1
    return labels


def _reassign(labels: np.ndarray, affinity: np.ndarray, max_passes: int = 10) -> np.ndarray:
    # Move every index to the cluster with highest mean affinity; repeat until stable.
    for _ in range(max_passes):
        ids, labels = np.unique(labels, return_inverse=True)
        onehot = np.zeros((len(labels), len(ids)))
        onehot[np.arange(len(labels)), labels] = 1.0
        score = (affinity @ onehot) / onehot.sum(axis=0)
        new = score.argmax(axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
    return labels


def estimate_partition(
    y: ObservedMatrix, k: int, axis: str = "rows", seed: Seed = 0
) -> Partition:
    """Cluster rows (or columns) from their k most similar peers.

    Every index picks its ``k`` nearest neighbors by agreement count (itself
    included).  Two indices are close when their neighbor sets overlap a lot.
    Groups of ``k`` are grown greedily around the indices whose neighbors
    agree most with each other; a final pass moves each index to the group
    it overlaps most on average.  Noiseless block data is recovered exactly.
    """
    if axis not in ("rows", "columns"):
        raise ValueError("axis must be 'rows' or 'columns'")
    z = y if axis == "rows" else y.transpose()
    n = z.n_rows
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if z.nnz == 0:
        warnings.warn("all entries erased; returning a single cluster", RuntimeWarning)
        return Partition(np.zeros(n, dtype=np.int64), 1 if n else 0, degenerate=True)

    sim = similarity_matrix(z)
    nn = _knn(sim, k, seeding.rng(seed))
    rows = np.repeat(np.arange(n), k)
    graph = sp.csr_matrix((np.ones(n * k), (rows, nn.ravel())), shape=(n, n))
    shared = (graph @ graph.T).toarray()
    # Raw agreement only separates equal shared-neighbor counts.
    affinity = shared + sim / (sim.max() + 1.0)
    cohesion = shared[rows, nn.ravel()].reshape(n, k).mean(axis=1)
    labels = _greedy_groups(affinity, cohesion, k)
    return Partition.from_labels(_reassign(labels, affinity))


def partition_accuracy(estimated: Partition, truth: Partition) -> float:
    """Fraction of indices covered by the best one-to-one matching of clusters."""
    table = np.zeros((estimated.cluster_count, truth.cluster_count), dtype=np.int64)
    np.add.at(table, (estimated.assignment, truth.assignment), 1)
    r, c = linear_sum_assignment(table, maximize=True)
    return float(table[r, c].sum()) / len(truth)


def recommend_by_cluster(
    y: ObservedMatrix,
    rows: Partition,
    cols: Partition,
    user: int,
    candidates: Optional[Sequence[int]] = None,
    seed: Seed = 0,
) -> Recommendation:
    """Pick the candidate-bearing column cluster with most 1s in the user's row-cluster block.

    The item is uniform among candidates inside the winning cluster; cluster
    ties are broken uniformly.  Because ``cols`` covers every column, some
    cluster always holds a candidate.
    """
    if len(rows) != y.n_rows or len(cols) != y.n_cols:
        raise ValueError("partitions must cover the matrix")
    cand = _candidates(y, user, candidates)
    rng = seeding.rng(seed)
    block_rows = rows.members(rows.assignment[user])
    ones = np.asarray(y.ones[block_rows].sum(axis=0)).ravel()
    zeros = np.asarray(y.zeros[block_rows].sum(axis=0)).ravel()
    w1 = np.bincount(cols.assignment, weights=ones, minlength=cols.cluster_count)
    w0 = np.bincount(cols.assignment, weights=zeros, minlength=cols.cluster_count)

    eligible = np.unique(cols.assignment[cand])
    best = eligible[w1[eligible] == w1[eligible].max()]
    winner = best[0] if len(best) == 1 else best[rng.integers(len(best))]
    inside = cand[cols.assignment[cand] == winner]
    item = inside[0] if len(inside) == 1 else inside[rng.integers(len(inside))]
    return Recommendation(
        item=int(item),
        vote_ones=int(w1[winner]),
        vote_zeros=int(w0[winner]),
        neighbors=block_rows,
        candidate_count=len(cand),
    )


def true_partitions(model: LatentModel) -> tuple[Partition, Partition]:
    r = int(model.cluster_values.shape[0])
    c = int(model.cluster_values.shape[1])
    return Partition(model.row_partition, r), Partition(model.col_partition, c)


def oracle_recommend(
    model: LatentModel,
    y: ObservedMatrix,
    user: int,
    candidates: Optional[Sequence[int]] = None,
    seed: Seed = 0,
) -> Recommendation:
    """Cluster recommender fed the ground-truth partitions."""
    rows, cols = true_partitions(model)
    return recommend_by_cluster(y, rows, cols, user, candidates, seed)


def cluster_recommend(
    y: ObservedMatrix,
    k: int,
    user: int,
    candidates: Optional[Sequence[int]] = None,
    seed: Seed = 0,
) -> Recommendation:
    """Estimate both partitions with cluster size ``k`` and recommend from them."""
    rows = estimate_partition(y, k, "rows", seeding.derive(seed, 0))
    cols = estimate_partition(y, k, "columns", seeding.derive(seed, 1))
    return recommend_by_cluster(y, rows, cols, user, candidates, seeding.derive(seed, 2))
