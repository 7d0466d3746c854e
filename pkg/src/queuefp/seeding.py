"""Deterministic seed derivation for independent random streams.

Every source of randomness in the pipeline derives its own 64-bit seed from
the master seed plus a path of labels (trial index, flow id, role). Streams
are therefore reproducible and independent of worker scheduling.
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(master_seed: int, *path: int | str) -> int:
    """Derive a 64-bit seed from a master seed and a label path."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(master_seed & _MASK64).to_bytes(8, "little"))
    for part in path:
        if isinstance(part, int):
            h.update(b"i" + int(part & _MASK64).to_bytes(8, "little"))
        else:
            encoded = str(part).encode("utf-8")
            h.update(b"s" + len(encoded).to_bytes(4, "little") + encoded)
    return int.from_bytes(h.digest(), "little")


def rng_for(master_seed: int, *path: int | str) -> np.random.Generator:
    """Generator seeded by ``derive_seed(master_seed, *path)``."""
    return np.random.default_rng(derive_seed(master_seed, *path))
