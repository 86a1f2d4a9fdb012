"""Seedable randomness source.

All protocol randomness flows through an :class:`Rng` so that a scenario
seed fixes every nonce, key and blinding factor. Seeded streams are
SHA-512 in counter mode; unseeded ones draw from ``os.urandom``.
"""

from __future__ import annotations

import hashlib
import os


class Rng:
    def __init__(self, seed: bytes | int | None = None):
        if seed is None:
            self._seed = None
        else:
            if isinstance(seed, int):
                seed = seed.to_bytes(8, "big", signed=False)
            self._seed = hashlib.sha512(b"ssicharge-rng" + bytes(seed)).digest()
        self._counter = 0
        self._pool = b""

    @property
    def deterministic(self) -> bool:
        return self._seed is not None

    def bytes(self, n: int) -> bytes:
        if self._seed is None:
            return os.urandom(n)
        while len(self._pool) < n:
            block = hashlib.sha512(self._seed + self._counter.to_bytes(8, "big")).digest()
            self._counter += 1
            self._pool += block
        out, self._pool = self._pool[:n], self._pool[n:]
        return out

    def bits(self, k: int) -> int:
        """Uniform integer in [0, 2**k)."""
        if k <= 0:
            return 0
        raw = int.from_bytes(self.bytes((k + 7) // 8), "big")
        return raw >> ((8 - k % 8) % 8)

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound) by rejection sampling."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        k = bound.bit_length()
        while True:
            x = self.bits(k)
            if x < bound:
                return x

    def between(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi)."""
        return lo + self.below(hi - lo)

    def child(self, label: str) -> "Rng":
        """Independent stream derived from this one (or fresh system randomness)."""
        if self._seed is None:
            return Rng()
        return Rng(hashlib.sha512(self._seed + b"/" + label.encode()).digest())
