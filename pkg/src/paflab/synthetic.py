"""Noisy block-constant rating model: X -> BSC(p) -> Erasure(eps) -> Y."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from paflab import seeding
from paflab.observed import ObservedMatrix
from paflab.seeding import Seed


class ParameterError(ValueError):
    """A model parameter violates its domain."""


@dataclass(frozen=True)
class ModelParams:
    """Generative parameters.

    ``n`` is the number of items (and of users unless ``m`` is given), ``k``
    the side of every cluster, ``p`` the BSC crossover probability, and the
    erasure probability is ``1 - c / n**alpha``.
    """

    n: int
    k: int
    p: float
    alpha: float
    c: float = 1.0
    m: Optional[int] = None

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise ParameterError("n and k must be positive")
        if self.n % self.k:
            raise ParameterError(f"k must divide n (n={self.n}, k={self.k})")
        if self.m is not None and (self.m < 1 or self.m % self.k):
            raise ParameterError(f"k must divide m (m={self.m}, k={self.k})")
        if not 0.0 <= self.p < 0.5:
            raise ParameterError(f"p must lie in [0, 1/2), got {self.p}")
        if not self.c > 0:
            raise ParameterError(f"c must be positive, got {self.c}")
        if not self.alpha >= 0:
            raise ParameterError(f"alpha must be non-negative, got {self.alpha}")
        erasure_prob(self)

    @property
    def n_rows(self) -> int:
        return self.n if self.m is None else self.m

    @property
    def n_cols(self) -> int:
        return self.n

    @property
    def r_rows(self) -> int:
        return self.n_rows // self.k

    @property
    def r_cols(self) -> int:
        return self.n_cols // self.k

    @property
    def epsilon(self) -> float:
        return erasure_prob(self)

    @property
    def observe_prob(self) -> float:
        return self.c / self.n**self.alpha

    @property
    def gamma(self) -> float:
        """Exponent gap ``alpha - log_n k``."""
        return self.alpha - math.log(self.k) / math.log(self.n)


def erasure_prob(params: ModelParams) -> float:
    q = params.c / params.n**params.alpha
    if q > 1:
        raise ParameterError(
            f"erasure probability would be negative: c/n^alpha = {q:.6g} > 1"
        )
    return 1.0 - q


@dataclass(frozen=True, eq=False)
class LatentModel:
    """Ground-truth block-constant matrix in factored form."""

    cluster_values: np.ndarray  # r_rows x r_cols, 0/1
    row_partition: np.ndarray  # user -> row cluster
    col_partition: np.ndarray  # item -> column cluster

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.row_partition), len(self.col_partition))

    def value(self, u, v):
        return self.cluster_values[self.row_partition[u], self.col_partition[v]]

    def dense(self) -> np.ndarray:
        return self.cluster_values[self.row_partition][:, self.col_partition]

    def dense_row(self, user: int) -> np.ndarray:
        return self.cluster_values[self.row_partition[user], self.col_partition]

    def row_cluster(self, user: int) -> np.ndarray:
        return np.flatnonzero(self.row_partition == self.row_partition[user])

    def __eq__(self, other) -> bool:
        if not isinstance(other, LatentModel):
            return NotImplemented
        return (
            np.array_equal(self.cluster_values, other.cluster_values)
            and np.array_equal(self.row_partition, other.row_partition)
            and np.array_equal(self.col_partition, other.col_partition)
        )

    __hash__ = None  # type: ignore[assignment]


def generate_latent(params: ModelParams, seed: Seed) -> LatentModel:
    rng = seeding.rng(seed, seeding.STREAM_CLUSTERS)
    values = rng.integers(0, 2, size=(params.r_rows, params.r_cols), dtype=np.int8)
    rows = np.arange(params.n_rows) // params.k
    cols = np.arange(params.n_cols) // params.k
    for a in (values, rows, cols):
        a.setflags(write=False)
    return LatentModel(values, rows, cols)


def _bernoulli_positions(rng: np.random.Generator, total: int, q: float) -> np.ndarray:
    # Sorted success indices among `total` i.i.d. Bernoulli(q) trials.
    # Sparse regimes skip ahead with geometric gaps instead of drawing every cell.
    if total == 0 or q <= 0:
        return np.zeros(0, dtype=np.int64)
    if q >= 0.1:
        return np.flatnonzero(rng.random(total) < q)
    mean = total * q
    chunk = int(mean + 6 * math.sqrt(mean) + 16)
    parts = []
    last = -1
    while last < total:
        # gaps past the end only terminate; clipping keeps cumsum from overflowing
        gaps = np.minimum(rng.geometric(q, size=chunk), total + 1)
        steps = np.cumsum(gaps) + last
        parts.append(steps)
        last = int(steps[-1])
    pos = np.concatenate(parts)
    return pos[: np.searchsorted(pos, total)]


def apply_channels(latent: LatentModel, params: ModelParams, seed: Seed) -> ObservedMatrix:
    """Flip every entry w.p. ``p`` and erase it w.p. ``epsilon``.

    Erasures and flips come from separate streams, and flips are drawn only
    for surviving entries in position order, so the erasure pattern does not
    depend on ``p``.
    """
    n_rows, n_cols = latent.shape
    if (n_rows, n_cols) != (params.n_rows, params.n_cols):
        raise ParameterError("latent model shape does not match params")
    q = params.observe_prob
    pos = _bernoulli_positions(
        seeding.rng(seed, seeding.STREAM_ERASURES), n_rows * n_cols, q
    )
    bits = latent.dense().ravel()[pos]
    if params.p > 0:
        flips = seeding.rng(seed, seeding.STREAM_FLIPS).random(len(pos)) < params.p
        bits ^= flips.astype(np.int8)
    indptr = np.searchsorted(pos, np.arange(n_rows + 1, dtype=np.int64) * n_cols)
    return ObservedMatrix._from_csr(n_rows, n_cols, indptr, pos % n_cols, bits)


def sample(params: ModelParams, seed: Seed) -> tuple[LatentModel, ObservedMatrix]:
    """Latent model and its observation, both derived from one seed."""
    latent = generate_latent(params, seed)
    return latent, apply_channels(latent, params, seed)
