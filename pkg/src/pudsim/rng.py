"""Named, reproducible random substreams.

Every stochastic component draws from its own substream derived from one
root seed plus a string label, so adding draws to one component never
shifts the sequence seen by another.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_key(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(root_seed: int, label: str) -> np.random.Generator:
    """Generator for (root_seed, label); stable across runs and platforms."""
    seq = np.random.SeedSequence(entropy=root_seed, spawn_key=(_label_key(label),))
    return np.random.Generator(np.random.PCG64(seq))


def stable_hash(seed: int, *parts: int) -> int:
    """Deterministic 64-bit mix of a seed and integer parts.

    Used where a single reproducible value per (seed, row, ...) is needed
    without the cost of constructing a Generator.
    """
    h = (seed & 0xFFFFFFFFFFFFFFFF) ^ 0x9E3779B97F4A7C15
    for p in parts:
        h ^= (p & 0xFFFFFFFFFFFFFFFF) * 0xBF58476D1CE4E5B9 & 0xFFFFFFFFFFFFFFFF
        h = (h ^ (h >> 31)) * 0x94D049BB133111EB & 0xFFFFFFFFFFFFFFFF
    return h ^ (h >> 29)
