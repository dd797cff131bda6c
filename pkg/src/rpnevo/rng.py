"""Seeded randomness for the engine.

All stochastic behaviour flows from one root seed. ``RandomStream`` wraps a
PCG64 generator and serves scalar draws from pre-filled blocks, which is
roughly 5x faster than calling the generator per draw; genome mutation burns
millions of tiny draws per run. Vectorised draws go straight through
``.gen``. The draw sequence is a pure function of the call sequence, so runs
are reproducible.
"""

from __future__ import annotations

import math

import numpy as np

_BLOCK = 8192


class RandomStream:
    __slots__ = ("gen", "_u", "_iu", "_n", "_in")

    def __init__(self, seed) -> None:
        if isinstance(seed, np.random.Generator):
            self.gen = seed
        else:
            self.gen = np.random.default_rng(seed)
        self._u = self.gen.random(_BLOCK)
        self._iu = 0
        self._n = self.gen.standard_normal(_BLOCK)
        self._in = 0

    def u01(self) -> float:
        """Uniform draw in [0, 1)."""
        i = self._iu
        if i == _BLOCK:
            self._u = self.gen.random(_BLOCK)
            i = 0
        self._iu = i + 1
        return self._u[i]

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        return int(self.u01() * n)

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.u01()

    def normal(self) -> float:
        i = self._in
        if i == _BLOCK:
            self._n = self.gen.standard_normal(_BLOCK)
            i = 0
        self._in = i + 1
        return self._n[i]

    def lognormal(self, sigma: float) -> float:
        return math.exp(sigma * self.normal())

    def spawn(self, n: int) -> list["RandomStream"]:
        """Independent child streams (for concurrent repeats)."""
        return [RandomStream(g) for g in self.gen.spawn(n)]


def seed_for(*entropy: int) -> np.random.SeedSequence:
    """Stable seed derivation from a tuple of integers."""
    return np.random.SeedSequence([int(e) & 0xFFFFFFFF for e in entropy])
