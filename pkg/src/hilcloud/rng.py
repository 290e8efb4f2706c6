"""Counter-based SplitMix64 stream.

Output ``i`` (0-based) of a stream seeded with ``s`` is ``mix(s + (i + 1) * GAMMA)``
with all arithmetic modulo 2**64, so any language can reproduce the same
numbers. Uniform doubles take the top 53 bits; normals use Box-Muller with
``u1`` drawn from (0, 1].
"""

from __future__ import annotations

import numpy as np

GAMMA = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def splitmix64(seed: int, start: int, count: int) -> np.ndarray:
    """Raw 64-bit outputs ``start .. start+count-1`` of the stream for ``seed``."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    z = np.uint64(seed & _MASK) + idx * np.uint64(GAMMA)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Stateful wrapper that hands out consecutive blocks of the stream."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK
        self.position = 0

    def _raw(self, n: int) -> np.ndarray:
        out = splitmix64(self.seed, self.position, n)
        self.position += n
        return out

    def uniform(self, size: int | tuple[int, ...]) -> np.ndarray:
        """Doubles in [0, 1)."""
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = int(np.prod(shape, dtype=np.int64))
        u = (self._raw(n) >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
        return u.reshape(shape)

    def normal(self, size: int | tuple[int, ...]) -> np.ndarray:
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = int(np.prod(shape, dtype=np.int64))
        u = self.uniform(2 * n)
        u1 = 1.0 - u[0::2]
        u2 = u[1::2]
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        return z.reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of ``range(n)``."""
        order = np.arange(n)
        if n < 2:
            return order
        u = self.uniform(n - 1)
        for k, i in enumerate(range(n - 1, 0, -1)):
            j = int(u[k] * (i + 1))
            order[i], order[j] = order[j], order[i]
        return order

    def xavier_uniform(self, fan_in: int, fan_out: int) -> np.ndarray:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return (2.0 * self.uniform((fan_in, fan_out)) - 1.0) * limit
