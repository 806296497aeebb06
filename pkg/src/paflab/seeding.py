"""Seed derivation shared by every randomized routine.

A seed is either a non-negative integer or a :class:`numpy.random.SeedSequence`.
Child seeds are obtained by appending integer keys to the sequence's
``spawn_key``, so ``derive(7, 3, 1)`` is the SeedSequence with entropy 7 and
spawn key ``(3, 1)``.  NumPy hashes (entropy, spawn_key) into the PCG64 state,
which makes every derived stream reproducible from the base seed and the key
path alone.  Trial ``i`` of a Monte Carlo run with base seed ``s`` therefore
uses ``derive(s, i)``, independent of execution order or worker count.
"""

from __future__ import annotations

from typing import Union

import numpy as np

Seed = Union[int, np.random.SeedSequence]

# Stream keys below a trial/user seed.
STREAM_CLUSTERS = 0
STREAM_FLIPS = 1
STREAM_ERASURES = 2
STREAM_ALGORITHM = 3


def derive(seed: Seed, *keys: int) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(
            seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(keys)
        )
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an int or SeedSequence, got {type(seed).__name__}")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.SeedSequence(int(seed), spawn_key=tuple(keys))


def rng(seed: Seed, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive(seed, *keys)))
