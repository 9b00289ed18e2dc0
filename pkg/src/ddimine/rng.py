"""Portable seeded pseudo-random generator used wherever randomness enters.

Split assignments, undersampling, fold construction and the synthetic data
generator all draw from this generator so that results reproduce bit-for-bit
across platforms and languages.  The core is xorshift64* with state ``x``:

    x ^= x >> 12
    x ^= (x << 25) mod 2**64
    x ^= x >> 27
    output = (x * 0x2545F4914F6CDD1D) mod 2**64

Seeds pass through the splitmix64 finalizer first, so small consecutive seeds
give unrelated streams:

    z = (seed + 0x9E3779B97F4A7C15) mod 2**64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2**64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2**64
    mix64(seed) = z ^ (z >> 31)

Everything below is pure 64-bit integer arithmetic.
"""

from __future__ import annotations

import math
from typing import Sequence, TypeVar

_MASK = (1 << 64) - 1

T = TypeVar("T")


def mix64(z: int) -> int:
    """splitmix64 finalizer; maps any 64-bit value to a well-mixed one."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class Rng:
    """Deterministic xorshift64* stream for a given integer seed."""

    def __init__(self, seed: int):
        self._seed = seed & _MASK
        state = mix64(self._seed)
        # xorshift state must be nonzero
        self._state = state if state != 0 else 0x9E3779B97F4A7C15

    @property
    def seed(self) -> int:
        return self._seed

    def derive(self, stream: int) -> "Rng":
        """Independent child stream; derivation depends only on (seed, stream)."""
        return Rng(mix64(self._seed) ^ mix64(stream + 1))

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x ^= (x << 25) & _MASK
        x ^= x >> 27
        self._state = x
        return (x * 0x2545F4914F6CDD1D) & _MASK

    def below(self, n: int) -> int:
        """Uniform integer in [0, n), rejection-sampled to avoid modulo bias."""
        if n <= 0:
            raise ValueError(f"below() requires n > 0, got {n}")
        threshold = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < threshold:
                return r % n

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        return lo + self.below(hi - lo + 1)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (2.0**-53)

    def normal(self) -> float:
        """Standard normal deviate via Box-Muller (one value per call)."""
        u1 = self.random()
        while u1 == 0.0:
            u1 = self.random()
        u2 = self.random()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def choice(self, items: Sequence[T]) -> T:
        if not items:
            raise ValueError("choice() on empty sequence")
        return items[self.below(len(items))]

    def sample_indices(self, n: int, k: int) -> list[int]:
        """k distinct indices from range(n), via partial Fisher-Yates; order random."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot sample {k} of {n}")
        arr = list(range(n))
        for i in range(k):
            j = i + self.below(n - i)
            arr[i], arr[j] = arr[j], arr[i]
        return arr[:k]
