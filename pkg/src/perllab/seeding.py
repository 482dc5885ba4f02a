"""Splittable seeding: every random stream derives from one root seed.

Cells of a sweep (seed index, sweep point, trial number, ...) each get an
independent generator keyed by their coordinates, so results do not depend
on execution order and parallel runs match serial ones.
"""

from __future__ import annotations

import numpy as np


def child_rng(root_seed: int, *key: int) -> np.random.Generator:
    """Generator for the cell addressed by `key` under `root_seed`."""
    ss = np.random.SeedSequence(entropy=int(root_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def child_seed(root_seed: int, *key: int) -> int:
    """64-bit integer seed for the cell addressed by `key` (for APIs that take ints)."""
    ss = np.random.SeedSequence(entropy=int(root_seed), spawn_key=tuple(int(k) for k in key))
    words = ss.generate_state(2, dtype=np.uint32)
    return int(words[0]) | (int(words[1]) << 32)
