"""Deterministic 64-bit PRNG shared by generators, oracles, and tests.

xorshift64*: state updates x ^= x >> 12; x ^= x << 25; x ^= x >> 27 (all
mod 2^64), output is state * 0x2545F4914F6CDD1D mod 2^64. Doubles take
the top 53 bits of the output. Pure integer arithmetic, so identical
seeds give identical streams on every platform.
"""

import math

_MASK = (1 << 64) - 1
_MULT = 0x2545F4914F6CDD1D
_DEFAULT_STATE = 0x9E3779B97F4A7C15


class Xorshift64Star:
    def __init__(self, seed):
        seed = int(seed) & _MASK
        self.state = seed if seed != 0 else _DEFAULT_STATE
        self._spare_normal = None

    def next_u64(self):
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & _MASK
        x ^= x >> 27
        self.state = x
        return (x * _MULT) & _MASK

    def uniform(self):
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform_in(self, lo, hi):
        return lo + (hi - lo) * self.uniform()

    def normal(self):
        """Standard normal via the Marsaglia polar method."""
        if self._spare_normal is not None:
            v = self._spare_normal
            self._spare_normal = None
            return v
        while True:
            u = 2.0 * self.uniform() - 1.0
            v = 2.0 * self.uniform() - 1.0
            s = u * u + v * v
            if 0.0 < s < 1.0:
                factor = math.sqrt(-2.0 * math.log(s) / s)
                self._spare_normal = v * factor
                return u * factor

    def normals(self, n):
        return [self.normal() for _ in range(n)]

    def randint(self, n):
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise ValueError("n must be positive")
        return self.next_u64() % n

    def sign(self):
        return 1.0 if self.next_u64() & 1 else -1.0

    def permutation(self, n):
        idx = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.randint(i + 1)
            idx[i], idx[j] = idx[j], idx[i]
        return idx
