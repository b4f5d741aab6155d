"""Seedable pseudo-random numbers for simulation and benchmarking.

The generator is pinned so that runs reproduce bit-identically across
platforms and Python versions:

* integer stream: SplitMix64 (Vigna's constants, 64-bit state, increment
  0x9E3779B97F4A7C15);
* uniform doubles: top 53 bits of the integer stream mapped to [0, 1);
* Gaussian doubles: Box-Muller transform (trigonometric form) with the
  second variate of each pair cached.

The standard library's Mersenne Twister is deliberately not used: its
distribution helpers are not guaranteed stable across Python releases,
and reproducibility here is a documented contract.
"""

from __future__ import annotations

import math

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_TWO53 = float(1 << 53)


class Rng:
    """SplitMix64 stream with uniform and Gaussian draws."""

    __slots__ = ("_state", "_cached_gauss")

    def __init__(self, seed: int):
        self._state = int(seed) & _MASK64
        self._cached_gauss: float | None = None

    def next_u64(self) -> int:
        """Next 64-bit integer of the SplitMix64 sequence."""
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) / _TWO53

    def gauss(self) -> float:
        """Standard normal draw (Box-Muller, cached pair)."""
        cached = self._cached_gauss
        if cached is not None:
            self._cached_gauss = None
            return cached
        # u1 in (0, 1] so log() is finite.
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        theta = 2.0 * math.pi * u2
        self._cached_gauss = r * math.sin(theta)
        return r * math.cos(theta)

    def gauss_vector(self, n: int) -> list:
        return [self.gauss() for _ in range(n)]
