"""Deterministic, splittable random number streams.

Built on numpy's counter-based Philox generator. A stream is identified by
(seed, stream id); child streams are derived by hashing labels, so every
consumer (a dropout site, an epoch shuffle, a parameter initializer) can own
an independent stream whose draws do not depend on evaluation order.
"""

from __future__ import annotations

import hashlib

import numpy as np


class SeededRng:
    """A named random stream with deterministic child derivation.

    Identical (seed, stream, draw sequence) produces identical output on all
    platforms; numpy guarantees bit-stream stability for Philox.
    """

    __slots__ = ("seed", "stream", "_gen")

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream = int(stream) & 0xFFFFFFFFFFFFFFFF
        self._gen = None

    def child(self, *labels) -> "SeededRng":
        """Derive an independent stream from hashable labels."""
        h = hashlib.blake2b(digest_size=8)
        h.update(repr((self.stream,) + labels).encode())
        return SeededRng(self.seed, int.from_bytes(h.digest(), "little"))

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            self._gen = np.random.Generator(
                np.random.Philox(key=np.array([self.seed, self.stream], dtype=np.uint64))
            )
        return self._gen

    # Convenience draws; these advance the stream's internal counter.

    def uniform(self, size=None, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        return self.generator.uniform(low, high, size=size)

    def normal(self, size=None, scale: float = 1.0) -> np.ndarray:
        return self.generator.normal(0.0, scale, size=size)

    def integers(self, low: int, high: int, size=None):
        return self.generator.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def choice(self, seq, p=None):
        idx = self.generator.choice(len(seq), p=p)
        return seq[int(idx)]

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, stream={self.stream:#x})"
