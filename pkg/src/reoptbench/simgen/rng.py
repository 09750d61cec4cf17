"""Reproducible random streams for series generation.

Each stream is a splitmix64 sequence whose state is derived from
(seed, recipe tag, candidate index):

    state0 = first 8 bytes (big-endian) of sha256(f"{seed}:{tag}:{index}")

Draws:

- next_u64:   state += 0x9E3779B97F4A7C15; z = state;
              z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
              z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
              return z ^ (z >> 31)            (all mod 2**64)
- uniform:    (next_u64 >> 11) * 2**-53, in [0, 1)
- randint:    uniform integer in [low, high] by rejection on the top bits
- bernoulli:  uniform() < p

Only integer arithmetic and exact dyadic scaling are involved, so any
implementation following this description reproduces a series bit for bit.
"""

import hashlib
from typing import List, Sequence

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB
_INV_2_53 = 2.0 ** -53


def stream_state(seed: int, tag: str, index: int) -> int:
    """Initial splitmix64 state of the stream (seed, tag, index)."""
    digest = hashlib.sha256(f"{seed}:{tag}:{index}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class SplitMix64:
    """splitmix64 generator with the draw helpers used by the recipes."""

    def __init__(self, state: int):
        self.state = state & _MASK64
        self.draws = 0

    @classmethod
    def stream(cls, seed: int, tag: str, index: int) -> "SplitMix64":
        return cls(stream_state(seed, tag, index))

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        self.draws += 1
        z = self.state
        z = ((z ^ (z >> 30)) * _MUL1) & _MASK64
        z = ((z ^ (z >> 27)) * _MUL2) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform real in [0, 1)."""
        return (self.next_u64() >> 11) * _INV_2_53

    def uniform_range(self, low: float, high: float) -> float:
        """Uniform real in [low, high)."""
        return low + (high - low) * self.uniform()

    def randint(self, low: int, high: int) -> int:
        """Uniform integer in [low, high], inclusive."""
        if high < low:
            raise ValueError(f"empty integer range [{low}, {high}]")
        span = high - low + 1
        if span == 1:
            return low
        bits = (span - 1).bit_length()
        while True:
            candidate = self.next_u64() >> (64 - bits)
            if candidate < span:
                return low + candidate

    def bernoulli(self, p: float) -> bool:
        return self.uniform() < p

    def sample(self, population: Sequence[int], k: int) -> List[int]:
        """k distinct items, uniform without replacement (partial Fisher-Yates)."""
        items = list(population)
        if not 0 <= k <= len(items):
            raise ValueError(f"cannot sample {k} of {len(items)} items")
        for i in range(k):
            j = self.randint(i, len(items) - 1)
            items[i], items[j] = items[j], items[i]
        return items[:k]
