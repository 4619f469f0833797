"""Named deterministic RNG streams derived from one master seed."""

from __future__ import annotations

import zlib

import numpy as np


def stream_seed(master_seed: int, name: str) -> np.random.SeedSequence:
    """Stable per-purpose seed: the stream name is hashed with crc32 so the
    derivation does not depend on Python's randomized string hashing."""
    return np.random.SeedSequence([int(master_seed) & 0xFFFFFFFF, zlib.crc32(name.encode("utf-8"))])


def named_stream(master_seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(stream_seed(master_seed, name))
