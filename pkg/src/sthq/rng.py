"""Named, splittable random streams.

Every consumer asks for a generator by name; the stream depends only on the
global seed and that name, so adding or reordering consumers elsewhere never
shifts anyone else's random numbers.
"""

from __future__ import annotations

import zlib

import numpy as np


def stream(seed: int, name: str) -> np.random.Generator:
    key = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(name.encode("utf-8"))])
    return np.random.Generator(np.random.Philox(key))


def child_seed(seed: int, name: str) -> int:
    """A 32-bit integer seed for APIs that take ints rather than generators."""
    return int(stream(seed, name).integers(0, 2**31 - 1))
