"""Counter-seeded SplitMix64 streams.

Each trial owns the stream ``(seed, trial_index)``, so a batch gives the same
counts whatever the chunking or worker count. The compiled core implements
the same generator bit for bit.
"""
from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_INV_2_53 = 2.0 ** -53


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_state(seed: int, stream: int) -> int:
    return mix64((mix64(seed & MASK64) + stream) & MASK64)


class RandomSource:
    """Deterministic 64-bit stream keyed by ``(seed, stream)``."""

    __slots__ = ("seed", "stream", "state")

    def __init__(self, seed: int = 0, stream: int = 0):
        self.seed = seed
        self.stream = stream
        self.state = stream_state(seed, stream)

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * _INV_2_53

    def pick(self, cum, lo: int, hi: int) -> int:
        """Index in ``[lo, hi)`` drawn from cumulative probabilities ``cum``."""
        u = self.uniform()
        k = lo
        while k < hi - 1 and u >= cum[k]:
            k += 1
        return k

    def spawn(self, stream: int) -> "RandomSource":
        return RandomSource(self.seed, stream)
