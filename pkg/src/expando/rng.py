"""SplitMix64: the pinned pseudo-random stream used for all seeded sampling.

Defined by algorithm (Steele, Lea & Flood 2014) rather than by library so
that sampled expansions reproduce bit-for-bit on any platform::

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)

all arithmetic mod 2**64. Uniform doubles are ``(next() >> 11) * 2**-53``.
The seed is taken mod 2**64 (negative seeds wrap).
"""

from __future__ import annotations

from typing import Sequence

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed: int) -> None:
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def choice_index(self, weights: Sequence[float]) -> int:
        """Index ``i`` drawn with probability ``weights[i] / sum(weights)``.

        Inverse-CDF over the weights in the given order; zero-weight entries
        are never selected.
        """
        total = float(sum(weights))
        if not total > 0:
            raise ValueError("weights must have a positive sum")
        u = self.random() * total
        acc = 0.0
        last = 0
        for i, w in enumerate(weights):
            if w <= 0:
                continue
            acc += w
            last = i
            if u < acc:
                return i
        return last
