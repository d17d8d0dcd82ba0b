"""Splittable, counter-based random streams.

Every random draw in the library comes from a Philox generator keyed by
(root seed, purpose tag, *indices).  Streams derived this way are independent
of the order in which they are created, so sweep cells and per-pair Monte
Carlo estimates can run in any order (or in parallel) and still reproduce the
same bits.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["stream", "spawn_key"]


def _key_word(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream key indices must be nonnegative")
        return int(part) & 0xFFFFFFFF
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8")) & 0xFFFFFFFF
    raise TypeError(f"unsupported stream key part: {part!r}")


def spawn_key(*parts) -> tuple[int, ...]:
    """Map a (tag, index, ...) path to a SeedSequence spawn key."""
    return tuple(_key_word(p) for p in parts)


def stream(seed: int, *parts) -> np.random.Generator:
    """Independent generator keyed by ``(seed, *parts)``.

    ``parts`` may mix strings (purpose tags) and nonnegative integers
    (indices).  The same key always yields the same stream.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=spawn_key(*parts))
    return np.random.Generator(np.random.Philox(ss))
