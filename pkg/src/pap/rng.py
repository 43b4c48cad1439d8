"""Reproducible uniform streams.

Streams are backed by the counter-based Philox generator, keyed by a
(seed, index) pair, so independent substreams for parallel or per-run use
are cheap to derive and the draw sequence for a given key is identical
across platforms and runs.
"""

from __future__ import annotations

from numpy.random import Generator, Philox

_MASK64 = (1 << 64) - 1
_BLOCK = 1024


def _key(seed: int, index: int) -> int:
    return ((seed & _MASK64) << 64) | (index & _MASK64)


class UniformStream:
    """Buffered stream of uniforms in [0, 1) for substream (seed, index)."""

    __slots__ = ("seed", "index", "_gen", "_buf", "_pos", "drawn")

    def __init__(self, seed: int, index: int = 0):
        self.seed = seed
        self.index = index
        self._gen = Generator(Philox(key=_key(seed, index)))
        self._buf = None
        self._pos = 0
        self.drawn = 0

    def next(self) -> float:
        if self._buf is None or self._pos >= len(self._buf):
            self._buf = self._gen.random(_BLOCK)
            self._pos = 0
        v = float(self._buf[self._pos])
        self._pos += 1
        self.drawn += 1
        return v

    def next_open(self) -> float:
        """Uniform in (0, 1): rejects exact zeros."""
        while True:
            v = self.next()
            if v != 0.0:
                return v

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.next()


def substream(seed: int, index: int) -> UniformStream:
    return UniformStream(seed, index)
