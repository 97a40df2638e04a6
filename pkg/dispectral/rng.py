"""Seeded random generators shared by samplers, solvers and the harness."""

import numpy as np


def make_rng(seed=None):
    """
    Return a Philox-backed numpy Generator.

    :param seed: int, SeedSequence, existing Generator (returned as is) or None.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def derive_seed(master_seed, *indices):
    """
    Derive the seed of one task of a sweep.

    Identical (master_seed, indices) give identical streams, and streams
    for different indices are independent, so tasks can run in any order.
    """
    return np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(i) for i in indices))


def spawn_seeds(seed, count):
    """
    Independent child seeds, one per restart or sample chunk.

    A Generator seed is consumed to draw the root entropy.
    """
    if isinstance(seed, np.random.Generator):
        seed = int(seed.integers(0, 2**63))
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    # Built from the spawn key rather than spawn(), which mutates the parent.
    return [
        np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + (index,))
        for index in range(count)
    ]


def seed_to_int(seed):
    """Collapse a seed to a 64-bit integer, for records and CSV rows."""
    if isinstance(seed, np.random.SeedSequence):
        return int(seed.generate_state(1, dtype=np.uint64)[0])
    return int(seed)
