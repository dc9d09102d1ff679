"""Deterministic seed derivation.

Every random choice is a function of a master seed plus a path of labels and
counters, hashed with BLAKE2b into a 64-bit child seed.  Independent copies of
a sampler at seed ``s`` use ``derive(s, "copy", i)``.
"""

from __future__ import annotations

import hashlib
import random

import numpy as np


def derive(seed: int, *path) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode())
    for part in path:
        h.update(b"/")
        h.update(str(part).encode())
    return int.from_bytes(h.digest(), "big")


def py_rng(seed: int, *path) -> random.Random:
    return random.Random(derive(seed, *path))


def np_rng(seed: int, *path) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive(seed, *path)))


def bernoulli_pow2(rng: random.Random, j: int) -> bool:
    """Exact Bernoulli(2**-j) draw: ``j`` fair bits that are all zero."""
    return j == 0 or rng.getrandbits(j) == 0
