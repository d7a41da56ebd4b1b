"""Seed handling shared by the simulators and the replication harness.

Each replication gets a 64-bit seed mixed from ``(master_seed, N index,
replication index)`` by ``np.random.SeedSequence``; the seed then drives a
PCG64 generator owned by that replication alone.
"""
from __future__ import annotations

import numpy as np


def replication_seed(master_seed: int, n_index: int, rep_index: int) -> int:
    """Deterministic 64-bit seed for one replication of a sweep."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(n_index), int(rep_index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed) -> np.random.Generator:
    """A PCG64 generator from an integer seed (a Generator passes through)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def seed_value(seed) -> int:
    """The integer recorded alongside a run (-1 when a live Generator was passed)."""
    if isinstance(seed, np.random.Generator) or seed is None:
        return -1
    return int(seed)
