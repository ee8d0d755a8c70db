"""Deterministic seed splitting."""
from __future__ import annotations

import numpy as np


def mix64(parent: int, index: int) -> int:
    """Child seed for component ``index`` of a run seeded with ``parent``.

    Uses numpy's ``SeedSequence`` hashing, so the value is stable across
    platforms and numpy versions that keep that algorithm.
    """
    ss = np.random.SeedSequence(int(parent) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def rng_for(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
