"""SplitMix64: the single source of randomness for all experiments.

Bit-exact definition (all arithmetic mod 2**64)::

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)

Derived draws:

* ``random()``: ``(next_u64() >> 11) * 2**-53``, a double in [0, 1).
* ``integers(lo, hi)``: uniform on the closed range; with ``span = hi - lo + 1``
  draws ``r = next_u64()`` until ``r < 2**64 - (2**64 % span)`` and returns
  ``lo + r % span``.
* ``normal()``: Box-Muller on two ``random()`` draws ``u1, u2``:
  ``sqrt(-2 log(1 - u1)) * cos(2 pi u2)``; the sine branch is discarded.
* ``spawn()``: a child generator seeded with the parent's next ``next_u64()``.
"""
from __future__ import annotations

import math
from fractions import Fraction

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    def __init__(self, seed: int = 0):
        if seed < 0 or seed > MASK:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.state = seed

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, a: float, b: float) -> float:
        return a + (b - a) * self.random()

    def integers(self, lo: int, hi: int) -> int:
        if hi < lo:
            raise ValueError("empty range")
        span = hi - lo + 1
        limit = (1 << 64) - ((1 << 64) % span)
        while True:
            r = self.next_u64()
            if r < limit:
                return lo + r % span

    def normal(self) -> float:
        u1 = self.random()
        u2 = self.random()
        return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)

    def rational(self, num_bound: int = 3, den_bound: int = 3, nonzero: bool = False) -> Fraction:
        while True:
            q = Fraction(self.integers(-num_bound, num_bound), self.integers(1, den_bound))
            if q or not nonzero:
                return q

    def bernoulli(self, p: float) -> bool:
        return self.random() < p

    def spawn(self) -> "SplitMix64":
        return SplitMix64(self.next_u64())
