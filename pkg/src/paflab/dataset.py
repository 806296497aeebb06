"""MovieLens-style rating files: load, quantize, split, filter, evaluate.

Ratings 4-5 count as "liked" (1) and 1-3 as not (0).  For each user a
uniformly random ``floor(0.3 * count)`` of their ratings is hidden as test
data; a recommendation can only be scored when it lands on a hidden entry, so
by default each user's candidate set is exactly their hidden items.
"""

from __future__ import annotations

import hashlib
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from os import PathLike
from typing import Iterator, NamedTuple, Optional, Union

import numpy as np

from paflab import seeding
from paflab.cluster import estimate_partition, recommend_by_cluster
from paflab.harness import TrialOutcome, TrialStats, summarize
from paflab.observed import ObservedMatrix
from paflab.paf import (
    _candidates,
    column_votes,
    predict_from_scores,
    recommend_from_scores,
    similarity_rows,
)
from paflab.seeding import Seed

log = logging.getLogger(__name__)

LIKE_THRESHOLD = 4
RMSE_LEVELS = (2.0, 4.5)  # mean of {1,2,3} and of {4,5}
BATCH = 256


class RatingParseError(ValueError):
    pass


class RatingRecord(NamedTuple):
    user: int
    item: int
    rating: int
    timestamp: Optional[int]


@dataclass(frozen=True, eq=False)
class RatingTable:
    """Column store of rating records; ``binary`` is set once quantized."""

    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    timestamps: np.ndarray  # -1 when absent
    binary: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.users)

    def __getitem__(self, i: int) -> RatingRecord:
        ts = int(self.timestamps[i])
        return RatingRecord(int(self.users[i]), int(self.items[i]), int(self.ratings[i]),
                            None if ts < 0 else ts)

    def __iter__(self) -> Iterator[RatingRecord]:
        return (self[i] for i in range(len(self)))


def _parse_line(line: str, sep: str, lineno: int) -> tuple[int, int, int, int]:
    parts = [p.strip() for p in line.split(sep)]
    if len(parts) not in (3, 4):
        raise RatingParseError(f"line {lineno}: expected 3 or 4 fields, got {line!r}")
    try:
        user, item = int(parts[0]), int(parts[1])
        rating_f = float(parts[2])
        ts = int(parts[3]) if len(parts) == 4 and parts[3] else -1
    except ValueError as exc:
        raise RatingParseError(f"line {lineno}: non-numeric field in {line!r}") from exc
    if rating_f != int(rating_f) or not 1 <= rating_f <= 5:
        raise RatingParseError(f"line {lineno}: rating must be an integer in 1..5, got {parts[2]}")
    return user, item, int(rating_f), ts


def load_ratings(path: Union[str, PathLike], fmt: Optional[str] = None) -> RatingTable:
    """Parse ``UserID::MovieID::Rating::Timestamp`` (``dat``) or ``user,item,rating[,ts]`` (``csv``).

    The format defaults from the file suffix.  A non-numeric first CSV line is
    taken as a header.  Repeated (user, item) pairs keep the last occurrence.
    """
    path = str(path)
    if fmt is None:
        fmt = "dat" if path.endswith(".dat") else "csv"
    if fmt not in ("dat", "csv"):
        raise ValueError(f"unknown format {fmt!r}")
    sep = "::" if fmt == "dat" else ","
    rows = []
    with open(path, encoding="latin-1") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if fmt == "csv" and not rows and lineno == 1 and not line.split(",")[0].strip().isdigit():
                continue
            rows.append(_parse_line(line, sep, lineno))
    if not rows:
        raise RatingParseError(f"{path}: no ratings found")
    arr = np.array(rows, dtype=np.int64)
    users, items = arr[:, 0], arr[:, 1]

    # Keep the last occurrence of each (user, item).
    order = np.lexsort((np.arange(len(arr)), items, users))
    u, i = users[order], items[order]
    last = np.ones(len(order), dtype=bool)
    last[:-1] = (u[1:] != u[:-1]) | (i[1:] != i[:-1])
    n_dup = int((~last).sum())
    if n_dup:
        warnings.warn(f"{n_dup} duplicate (user, item) ratings; keeping the last of each")
    keep = np.sort(order[last])
    arr = arr[keep]
    return RatingTable(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])


def quantize_rating(rating: int) -> int:
    return int(rating >= LIKE_THRESHOLD)


def quantize(table: RatingTable) -> RatingTable:
    return replace(table, binary=(table.ratings >= LIKE_THRESHOLD).astype(np.int8))


@dataclass(frozen=True, eq=False)
class SplitDataset:
    """Binary training matrix plus the hidden test entries, in dense indices."""

    train: ObservedMatrix
    test_users: np.ndarray
    test_items: np.ndarray
    test_binary: np.ndarray
    test_raw: np.ndarray
    user_ids: np.ndarray  # dense index -> original id
    item_ids: np.ndarray

    @property
    def n_test(self) -> int:
        return len(self.test_users)

    def hidden_items(self, user: int) -> np.ndarray:
        return self.test_items[self._test_slice(user)]

    def _test_slice(self, user: int) -> slice:
        lo, hi = np.searchsorted(self.test_users, [user, user + 1])
        return slice(int(lo), int(hi))


def split_train_test(table: RatingTable, hide_frac: float = 0.30, seed: Seed = 0) -> SplitDataset:
    if not 0 < hide_frac < 1:
        raise ValueError("hide_frac must lie in (0, 1)")
    if table.binary is None:
        table = quantize(table)
    user_ids, uidx = np.unique(table.users, return_inverse=True)
    item_ids, iidx = np.unique(table.items, return_inverse=True)
    uidx, iidx = uidx.ravel(), iidx.ravel()

    keys = seeding.rng(seed).random(len(table))
    order = np.lexsort((keys, uidx))
    counts = np.bincount(uidx, minlength=len(user_ids))
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    rank = np.empty(len(table), dtype=np.int64)
    rank[order] = np.arange(len(table)) - np.repeat(starts, counts)
    n_hide = np.floor(hide_frac * counts + 1e-9).astype(np.int64)
    is_test = rank < n_hide[uidx]

    tr = ~is_test
    train = ObservedMatrix.from_entries(
        len(user_ids), len(item_ids), uidx[tr], iidx[tr], table.binary[tr]
    )
    te = np.flatnonzero(is_test)
    te = te[np.lexsort((iidx[te], uidx[te]))]
    return SplitDataset(
        train=train,
        test_users=uidx[te],
        test_items=iidx[te],
        test_binary=table.binary[te].astype(np.int8),
        test_raw=table.ratings[te],
        user_ids=user_ids,
        item_ids=item_ids,
    )


def filter_popular(ds: SplitDataset, threshold: float = 0.60) -> SplitDataset:
    """Drop items whose share of 1s among training ratings exceeds ``threshold``.

    Items with no training ratings have no share and are kept.
    """
    y = ds.train
    ones = np.bincount(y.indices, weights=y.values, minlength=y.n_cols)
    total = np.bincount(y.indices, minlength=y.n_cols)
    with np.errstate(invalid="ignore", divide="ignore"):
        share = np.where(total > 0, ones / np.maximum(total, 1), 0.0)
    keep = ~((total > 0) & (share > threshold))
    if not keep.any():
        raise ValueError(f"every item has more than {threshold:.0%} ones; nothing left")
    new_index = np.full(y.n_cols, -1, dtype=np.int64)
    new_index[keep] = np.arange(int(keep.sum()))

    rows = y.row_ids()
    kept = keep[y.indices]
    train = ObservedMatrix.from_entries(
        y.n_rows, int(keep.sum()), rows[kept], new_index[y.indices[kept]], y.values[kept]
    )
    tk = keep[ds.test_items]
    log.info("popularity filter removed %d of %d items", int((~keep).sum()), y.n_cols)
    return SplitDataset(
        train=train,
        test_users=ds.test_users[tk],
        test_items=new_index[ds.test_items[tk]],
        test_binary=ds.test_binary[tk],
        test_raw=ds.test_raw[tk],
        user_ids=ds.user_ids,
        item_ids=ds.item_ids[keep],
    )


def _pick(ones: np.ndarray, cand: np.ndarray, rng: np.random.Generator) -> int:
    c = ones[cand]
    best = cand[c == c.max()]
    return int(best[0] if len(best) == 1 else best[rng.integers(len(best))])


def _user_outcome(ds: SplitDataset, user: int, item: int) -> TrialOutcome:
    sl = ds._test_slice(user)
    hit = np.flatnonzero(ds.test_items[sl] == item)
    if len(hit) == 0:
        return TrialOutcome(None)  # uncheckable recommendation
    return TrialOutcome(int(ds.test_binary[sl][hit[0]] == 0))


def _eval_users(args) -> list[TrialOutcome]:
    ds, users, method, T, seed, candidates, partitions = args
    y = ds.train
    out = []
    global_ones = column_votes(y, np.arange(y.n_rows))[0] if method == "global" else None
    for start in range(0, len(users), BATCH):
        batch = users[start:start + BATCH]
        scores = similarity_rows(y, batch) if method == "paf" else None
        for b, u in enumerate(batch):
            hidden = ds.hidden_items(u)
            cand = hidden if candidates == "hidden" else None
            try:
                cand = _candidates(y, int(u), cand)
            except ValueError:
                continue
            s = seeding.derive(seed, int(u))
            if method == "paf":
                item = recommend_from_scores(y, int(u), T, scores[b], cand, s).item
            elif method == "global":
                # Same draws as recommend_global: taking every row consumes none.
                item = _pick(global_ones, cand, seeding.rng(s))
            else:
                rows, cols = partitions
                item = recommend_by_cluster(y, rows, cols, int(u), cand, s).item
            out.append(_user_outcome(ds, int(u), item))
    return out


def eval_ber(
    ds: SplitDataset,
    method: str = "paf",
    T: int = 100,
    seed: Seed = 0,
    candidates: str = "hidden",
    k: Optional[int] = None,
    workers: int = 1,
) -> TrialStats:
    """One recommendation per user with hidden items; an error is a hidden 0.

    ``method`` is ``paf`` (PAF(T)), ``global`` (PAF with T = all users) or
    ``cluster`` (partition-based, cluster size ``k``).  With
    ``candidates="all"`` every unrated item is eligible and recommendations
    that miss the hidden set are counted in ``discarded``.
    """
    if method not in ("paf", "global", "cluster"):
        raise ValueError(f"unknown method {method!r}")
    if candidates not in ("hidden", "all"):
        raise ValueError("candidates must be 'hidden' or 'all'")
    if ds.n_test == 0:
        raise ValueError("dataset has no hidden entries")
    y = ds.train
    if method == "paf" and not 1 <= T <= y.n_rows:
        raise ValueError(f"T must lie in [1, {y.n_rows}], got {T}")
    partitions = None
    if method == "cluster":
        if k is None:
            raise ValueError("cluster method needs k")
        partitions = (
            estimate_partition(y, k, "rows", seeding.derive(seed, 2**31)),
            estimate_partition(y, k, "columns", seeding.derive(seed, 2**31 + 1)),
        )
    users = np.unique(ds.test_users)
    chunks = np.array_split(users, max(1, min(workers * 4, len(users))))
    jobs = [(ds, c, method, T, seed, candidates, partitions) for c in chunks]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_eval_users, jobs))
    else:
        parts = [_eval_users(j) for j in jobs]
    return summarize([o for p in parts for o in p])


def eval_rmse(ds: SplitDataset, T: int = 100, seed: Seed = 0, fallback: int = 1) -> float:
    """RMSE of PAF(T) majority predictions mapped to 2.0 / 4.5 against raw test ratings."""
    if ds.n_test == 0:
        raise ValueError("dataset has no hidden entries")
    y = ds.train
    pred = np.empty(ds.n_test, dtype=np.int8)
    users = np.unique(ds.test_users)
    for start in range(0, len(users), BATCH):
        batch = users[start:start + BATCH]
        scores = similarity_rows(y, batch)
        for b, u in enumerate(batch):
            sl = ds._test_slice(int(u))
            pred[sl] = predict_from_scores(
                y, int(u), ds.test_items[sl], T, scores[b], seeding.derive(seed, int(u)), fallback
            )
    return rmse_from_binary(pred, ds.test_raw)


def rmse_from_binary(pred_binary, raw) -> float:
    levels = np.where(np.asarray(pred_binary) == 1, RMSE_LEVELS[1], RMSE_LEVELS[0])
    return float(math.sqrt(np.mean((levels - np.asarray(raw, dtype=float)) ** 2)))


def file_checksum(path: Union[str, PathLike]) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()
