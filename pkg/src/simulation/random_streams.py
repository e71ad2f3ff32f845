"""
Seeded random substreams

Every random artifact of an experiment draws from its own substream so that
changing one artifact (for example the noise) never shifts the draws of another.
A substream is identified by (seed, stream, *keys) and built as

    Generator(PCG64(SeedSequence(entropy=seed, spawn_key=(stream, *keys))))

Trial t of an experiment uses seed = base_seed + t.
"""

from enum import IntEnum

import numpy as np

from src.errors import ArgumentError


class Stream(IntEnum):
    """Substream identifiers, one per artifact kind"""

    DICTIONARY = 0
    AMPLITUDES = 1
    NOISE = 2
    NOVEL_ATOM = 3
    NOVEL_AMPLITUDES = 4
    ACTIVE_SET = 5


def make_rng(seed: int, stream: Stream, *keys: int) -> np.random.Generator:
    """Build the generator for one artifact substream"""
    if seed < 0:
        raise ArgumentError(f"Seed must be non-negative, got {seed}")
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), *(int(k) for k in keys)))
    return np.random.Generator(np.random.PCG64(sequence))
