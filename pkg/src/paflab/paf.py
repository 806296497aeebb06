"""Popularity Amongst Friends, PAF(T).

Step 1 ranks every row by the number of commonly observed columns on which it
agrees with the target user and keeps the top T.  Step 2 recommends, among the
candidate columns, the one with most 1s across those T rows.

The user's own row always occupies one of the T slots (its self-similarity is
maximal anyway); the remaining T-1 slots go to the most similar other rows,
with ties at the cutoff broken uniformly at random.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from paflab import seeding
from paflab.observed import ObservedMatrix
from paflab.seeding import Seed


@dataclass(frozen=True, eq=False)
class Recommendation:
    item: int
    vote_ones: int
    vote_zeros: int
    neighbors: np.ndarray = field(repr=False)
    candidate_count: int

    def __eq__(self, other) -> bool:
        if not isinstance(other, Recommendation):
            return NotImplemented
        return (
            (self.item, self.vote_ones, self.vote_zeros, self.candidate_count)
            == (other.item, other.vote_ones, other.vote_zeros, other.candidate_count)
            and np.array_equal(self.neighbors, other.neighbors)
        )

    __hash__ = None  # type: ignore[assignment]


def similarity(y: ObservedMatrix, i: int, j: int) -> int:
    """Number of columns observed in both rows on which they agree."""
    ci, bi = y.row(i)
    cj, bj = y.row(j)
    _, ii, jj = np.intersect1d(ci, cj, assume_unique=True, return_indices=True)
    return int(np.count_nonzero(bi[ii] == bj[jj]))


def similarity_rows(y: ObservedMatrix, users: Sequence[int]) -> np.ndarray:
    """Dense ``len(users) x n_rows`` block of similarities, via sparse products."""
    users = np.asarray(users, dtype=np.int64)
    block = y.ones[users] @ y.ones.T + y.zeros[users] @ y.zeros.T
    return np.asarray(block.toarray(), dtype=np.int64)


def similarities(y: ObservedMatrix, user: int) -> np.ndarray:
    """Similarity of ``user`` to every row, computed in O(nnz)."""
    cols, bits = y.row(user)
    user_bits = np.full(y.n_cols, -1, dtype=np.int8)
    user_bits[cols] = bits
    return y.row_sums(user_bits[y.indices] == y.values)


def _select(scores: np.ndarray, user: int, T: int, rng: np.random.Generator) -> np.ndarray:
    m = len(scores)
    if not 1 <= T <= m:
        raise ValueError(f"T must lie in [1, {m}], got {T}")
    others = np.delete(np.arange(m), user)
    need = T - 1
    if need == len(others):
        picked = others[np.argsort(-scores[others], kind="stable")]
        return np.concatenate(([user], picked))
    if need == 0:
        return np.array([user])
    s = scores[others]
    cutoff = np.partition(s, len(s) - need)[len(s) - need]
    above = others[s > cutoff]
    above = above[np.argsort(-scores[above], kind="stable")]
    tied = others[s == cutoff]
    take = need - len(above)
    if take < len(tied):
        tied = np.sort(rng.choice(tied, size=take, replace=False))
    return np.concatenate(([user], above, tied))


def top_neighbors(y: ObservedMatrix, user: int, T: int, seed: Seed = 0) -> np.ndarray:
    """Indices of the T rows most similar to ``user``, the user first."""
    return _select(similarities(y, user), user, T, seeding.rng(seed))


def _candidates(y: ObservedMatrix, user: int, candidates) -> np.ndarray:
    if candidates is None:
        cand = y.erased_columns(user)
    else:
        cand = np.unique(np.asarray(candidates, dtype=np.int64))
        if len(cand) and (cand[0] < 0 or cand[-1] >= y.n_cols):
            raise IndexError("candidate column out of range")
    if len(cand) == 0:
        raise ValueError(f"no candidate columns for user {user}")
    return cand


def column_votes(y: ObservedMatrix, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-column counts of observed 1s and 0s among ``rows``."""
    cols, bits = y.entries_of(rows)
    ones = np.bincount(cols, weights=bits, minlength=y.n_cols).astype(np.int64)
    total = np.bincount(cols, minlength=y.n_cols)
    return ones, total - ones


def vote(
    y: ObservedMatrix,
    neighbors: np.ndarray,
    cand: np.ndarray,
    rng: np.random.Generator,
) -> Recommendation:
    ones, zeros = column_votes(y, neighbors)
    cand_ones = ones[cand]
    best = cand[cand_ones == cand_ones.max()]
    item = int(best[0] if len(best) == 1 else best[rng.integers(len(best))])
    return Recommendation(
        item=item,
        vote_ones=int(ones[item]),
        vote_zeros=int(zeros[item]),
        neighbors=neighbors,
        candidate_count=len(cand),
    )


def recommend(
    y: ObservedMatrix,
    user: int,
    T: int,
    candidates: Optional[Sequence[int]] = None,
    seed: Seed = 0,
) -> Recommendation:
    """Recommend one column to ``user`` with PAF(T).

    ``candidates`` defaults to the columns erased in the user's row.
    """
    return recommend_from_scores(y, user, T, similarities(y, user), candidates, seed)


def recommend_from_scores(
    y: ObservedMatrix,
    user: int,
    T: int,
    scores: np.ndarray,
    candidates: Optional[Sequence[int]] = None,
    seed: Seed = 0,
) -> Recommendation:
    """:func:`recommend` with the user's similarity row supplied by the caller."""
    cand = _candidates(y, user, candidates)
    rng = seeding.rng(seed)
    neighbors = _select(scores, user, T, rng)
    return vote(y, neighbors, cand, rng)


def recommend_global(
    y: ObservedMatrix,
    user: int,
    candidates: Optional[Sequence[int]] = None,
    seed: Seed = 0,
) -> Recommendation:
    """Global popularity: PAF with every row as a neighbor."""
    return recommend(y, user, y.n_rows, candidates, seed)


def predict_items(
    y: ObservedMatrix,
    user: int,
    items: Sequence[int],
    T: int,
    seed: Seed = 0,
    fallback: int = 1,
) -> np.ndarray:
    """Majority bit among the top-T rows for each of ``items``; ties give ``fallback``."""
    return predict_from_scores(y, user, items, T, similarities(y, user), seed, fallback)


def predict_from_scores(
    y: ObservedMatrix,
    user: int,
    items: Sequence[int],
    T: int,
    scores: np.ndarray,
    seed: Seed = 0,
    fallback: int = 1,
) -> np.ndarray:
    items = np.asarray(items, dtype=np.int64)
    neighbors = _select(scores, user, T, seeding.rng(seed))
    ones, zeros = column_votes(y, neighbors)
    ones, zeros = ones[items], zeros[items]
    out = np.where(ones > zeros, 1, 0)
    out[ones == zeros] = fallback
    return out


def predict_entry(
    y: ObservedMatrix,
    user: int,
    item: int,
    T: int,
    seed: Seed = 0,
    fallback: int = 1,
) -> int:
    if not 0 <= item < y.n_cols:
        raise IndexError(f"column {item} out of range")
    return int(predict_items(y, user, [item], T, seed, fallback)[0])
