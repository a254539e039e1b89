"""Deterministic per-replicate random streams.

Streams are Philox counter-based generators keyed by the 128-bit pair
(master_seed, replicate_index).  Distinct key pairs give independent cipher
streams by construction, so replicate i's draws never depend on how many
workers ran or in which order replicates were scheduled.
"""

from __future__ import annotations

import numpy as np

__all__ = ["stream", "stream_state"]

_MASK64 = (1 << 64) - 1


def stream(master_seed: int, replicate_index: int) -> np.random.Generator:
    """Generator for one replicate; a pure function of the two integers."""
    if not (0 <= master_seed <= _MASK64):
        raise ValueError("master seed must fit in 64 bits")
    if not (0 <= replicate_index <= _MASK64):
        raise ValueError("replicate index must fit in 64 bits")
    key = np.array([master_seed, replicate_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def stream_state(master_seed: int, replicate_index: int) -> int:
    """First raw 64-bit word of the stream (used by collision tests)."""
    bg = np.random.Philox(key=np.array([master_seed, replicate_index], dtype=np.uint64))
    return int(bg.random_raw(1)[0])
