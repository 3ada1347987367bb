"""
Named random substreams.
Every random draw in the package comes from `substream(seed, *path)`, so two
components that share a path prefix see paired noise.
"""

import zlib
from typing import Union

import numpy as np

Key = Union[str, int]


def _key_word(part: Key) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"substream counters must be nonnegative, got {part}")
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def substream(seed: int, *path: Key) -> np.random.Generator:
    """Generator for the stream addressed by `path` under the top-level `seed`."""
    spawn_key = tuple(_key_word(part) for part in path)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=spawn_key))


def derive_seed(seed: int, *path: Key) -> int:
    """A plain integer seed for the stream `path`, for handing to another process."""
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(_key_word(part) for part in path))
    return int(sequence.generate_state(1, dtype=np.uint32)[0])
