"""Deterministic random streams built on splitmix64.

Bit-exact reproducibility matters more here than raw throughput: golden
end-to-end values are frozen into the test suite, so every random draw in
the package goes through this stream instead of numpy's generators (whose
distribution code may change between releases). Independent substreams are
derived by name, so adding a consumer never shifts another consumer's draws.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _fnv1a(s: str) -> int:
    h = 0xCBF29CE484222325
    for b in s.encode("utf-8"):
        h ^= b
        h = (h * 0x100000001B3) & _MASK
    return h


class SplitMix64:
    """64-bit splitmix stream with named child streams."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def child(self, key: int | str) -> "SplitMix64":
        k = _fnv1a(key) if isinstance(key, str) else (key & _MASK)
        return SplitMix64(_mix(self._state ^ _mix((k + 1) * _GAMMA)))

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        return _mix(self._state)

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        u = (self.next_u64() >> 11) * 2.0**-53  # [0, 1)
        return low + (high - low) * u

    def normal(self, mean: float = 0.0, std: float = 1.0) -> float:
        # Box-Muller; u1 in (0, 1] keeps the log finite. The sine mate is
        # discarded so the stream position stays a simple function of the
        # number of calls.
        u1 = ((self.next_u64() >> 11) + 1) * 2.0**-53
        u2 = (self.next_u64() >> 11) * 2.0**-53
        z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        return mean + std * z

    def uniforms(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        return np.array([self.uniform(low, high) for _ in range(n)], dtype=np.float64)

    def normals(self, n: int, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        return np.array([self.normal(mean, std) for _ in range(n)], dtype=np.float64)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_u64() % (i + 1)
            items[i], items[j] = items[j], items[i]
