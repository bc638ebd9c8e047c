"""
Seeded random streams.

Every random draw of an experiment comes from a PCG64 generator keyed by
(seed, stream, ...) through numpy's SeedSequence, so streams are independent
of each other and of the order in which they are consumed.
"""

import numpy as np

SPLIT_STREAM = 0
DATA_STREAM = 1
INIT_STREAM = 2
SHUFFLE_STREAM = 3
DROPOUT_STREAM = 4


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """PCG64 generator for the substream (seed, keys)"""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(keys))))


def derive_seed(seed: int, *keys: int) -> int:
    """Collapse the substream (seed, keys) into a single 64-bit seed"""
    state = np.random.SeedSequence(seed, spawn_key=tuple(keys)).generate_state(1, dtype=np.uint64)
    return int(state[0])
