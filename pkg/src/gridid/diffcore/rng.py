"""Seeded random streams.

Every stochastic routine takes an :class:`Rng`.  Sub-streams are derived
from the seed sequence, so a particle or a scenario gets the same draws no
matter how many other streams were spawned before it.
"""
from __future__ import annotations

import numpy as np


class Rng:
    def __init__(self, seed: int, key: tuple = ()):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")
        self.seed = int(seed)
        self.key = tuple(key)
        self._ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self.gen = np.random.Generator(np.random.PCG64(self._ss))

    def child(self, *key) -> "Rng":
        """Independent stream addressed by ``key`` (ints or short strings)."""
        return Rng(self.seed, self.key + tuple(_as_int(k) for k in key))

    def __repr__(self):
        return f"Rng(seed={self.seed}, key={self.key})"

    # thin passthroughs used throughout the package
    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.gen.normal(loc, scale, size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.gen.uniform(low, high, size)

    def standard_t(self, df, size=None):
        return self.gen.standard_t(df, size)


def _as_int(k) -> int:
    if isinstance(k, (int, np.integer)):
        return int(k)
    # stable across interpreter runs (unlike hash())
    return int.from_bytes(str(k).encode()[:8].ljust(8, b"\0"), "little")
