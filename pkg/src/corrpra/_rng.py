"""Counter-based random substreams.

A stream is addressed by ``(seed, name, index)`` and backed by a Philox
generator keyed on those three values, so trial ``k`` of the null ensemble
draws the same numbers whichever worker runs it and in whatever order.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def substream(seed: int, name: str, index: int = 0) -> np.random.Generator:
    if not 0 <= index < 1 << 32:
        raise ValueError(f"substream index {index} outside [0, 2**32)")
    tag = zlib.crc32(name.encode("utf-8"))
    key = np.array([int(seed) & _MASK64, (tag << 32) | index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
