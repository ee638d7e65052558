"""Seeding helpers.

Every random draw in the package goes through a Philox (counter-based)
generator, so a trial's stream depends only on ``(seed, trial index)`` and
Monte Carlo loops can be split or reordered without changing results.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed=None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def trial_seed(seed, index: int) -> np.random.SeedSequence:
    """Independent substream number ``index`` derived from ``seed``."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + (index,))
    return np.random.SeedSequence(seed, spawn_key=(index,))


def substream(seed, *keys: int) -> np.random.SeedSequence:
    """Substream addressed by a tuple of integer keys, e.g. ``(n, trial)``."""
    base = seed.entropy if isinstance(seed, np.random.SeedSequence) else seed
    prefix = tuple(seed.spawn_key) if isinstance(seed, np.random.SeedSequence) else ()
    return np.random.SeedSequence(base, spawn_key=prefix + tuple(int(k) for k in keys))
