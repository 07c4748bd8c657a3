"""Splittable, counter-based random streams.

Every Monte Carlo path in the package draws from a :class:`RandomStream`.
A stream is identified by a 64-bit seed plus a split path; the numpy
generator behind it is Philox (counter-based), keyed through
``SeedSequence(seed, spawn_key=path)``.  Two streams with the same seed and
path produce bit-identical draws, and ``split(i)`` / ``split(j)`` give
independent substreams for ``i != j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["RandomStream", "as_stream"]

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class RandomStream:
    seed: int
    path: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not 0 <= int(self.seed) <= _SEED_MASK:
            raise ValueError(f"seed must fit in 64 bits, got {self.seed}")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "path", tuple(int(i) for i in self.path))

    def split(self, index: int) -> "RandomStream":
        """Child stream ``index`` of this stream."""
        if index < 0:
            raise ValueError("split index must be nonnegative")
        return RandomStream(self.seed, self.path + (int(index),))

    def spawn(self, count: int) -> list["RandomStream"]:
        return [self.split(i) for i in range(count)]

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(seq))

    @property
    def label(self) -> str:
        return "/".join([str(self.seed), *map(str, self.path)])


def as_stream(stream: RandomStream | int | None, default_seed: int = 0) -> RandomStream:
    if stream is None:
        return RandomStream(default_seed)
    if isinstance(stream, RandomStream):
        return stream
    return RandomStream(int(stream))
