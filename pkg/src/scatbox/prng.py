"""Deterministic randomness rooted in a single 64-bit seed.

Every stochastic decision in a run (dataset shuffling, segment
down-sampling, weight initialization, probe signals) is drawn from a
SplitMix64 stream derived from one seed, so splits are reproducible
bit-for-bit from the seed alone, including by reimplementations in
other languages. Heavy numeric sampling (noise, Gaussian inits) goes
through a numpy generator seeded from the same stream.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """SplitMix64 output function: one avalanche of a 64-bit state."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def _fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _MASK64
    return h


class SplitMix64:
    """Counter-based 64-bit PRNG with named child streams.

    `derive(tag)` children depend only on (seed, tag), never on how many
    values were drawn before, which keeps consumers order-independent.
    """

    def __init__(self, seed: int):
        self._seed = seed & _MASK64
        self._state = seed & _MASK64

    @property
    def seed(self) -> int:
        return self._seed

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return mix64(self._state)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n); rejection keeps the draw unbiased."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def subsample(self, n: int, k: int) -> list[int]:
        """k of n indices, order preserved, chosen uniformly."""
        if k >= n:
            return list(range(n))
        idx = list(range(n))
        self.shuffle(idx)
        return sorted(idx[:k])

    def derive(self, tag: str) -> "SplitMix64":
        """Child stream keyed by the original seed and a textual tag."""
        return SplitMix64(mix64(self._seed ^ _fnv1a64(tag)))

    def numpy_rng(self, tag: str) -> np.random.Generator:
        """A numpy generator seeded from the derived stream `tag`."""
        return np.random.Generator(np.random.PCG64(self.derive(tag).next_u64()))
