"""Seeded, splittable random streams.

Every consumer (one frame of random-access placement, one load point of a
Monte Carlo sweep) asks for its own child stream keyed by integers, so the
draws it sees do not depend on the order in which other consumers ran.
"""

from __future__ import annotations

import numpy as np


class Rng:
    """Counter-based generator (Philox) with integer-keyed child streams."""

    def __init__(self, seed: int, key: tuple[int, ...] = ()):
        if not 0 <= seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        self.generator = np.random.Generator(np.random.Philox(seq))

    def split(self, *key: int) -> Rng:
        """Independent stream addressed by ``key`` below this one."""
        return Rng(self.seed, self.key + tuple(key))

    def integers(self, high, size=None) -> np.ndarray:
        return self.generator.integers(0, high, size=size)

    def random(self, size=None):
        return self.generator.random(size)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, key={self.key})"
