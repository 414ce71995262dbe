"""Seedable random streams.

Every stochastic routine takes an :class:`RngStream`. A stream is identified by
a master seed plus a path of integer indices, so trial ``i`` of grid point
``g`` always gets the same numbers no matter how the work is scheduled.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_index: tuple[int, ...] = ()
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if isinstance(self.stream_index, int):
            object.__setattr__(self, "stream_index", (self.stream_index,))
        seq = np.random.SeedSequence(
            int(self.master_seed) & _SEED_MASK, spawn_key=tuple(self.stream_index)
        )
        object.__setattr__(self, "_gen", np.random.Generator(np.random.PCG64(seq)))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def child(self, *index: int) -> "RngStream":
        """Independent sub-stream; does not consume numbers from ``self``."""
        return RngStream(self.master_seed, self.stream_index + tuple(int(i) for i in index))

    # thin conveniences over the generator
    def random(self, size=None):
        return self._gen.random(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def permutation(self, n):
        return self._gen.permutation(n)

    def bernoulli(self, p: float) -> bool:
        return bool(self._gen.random() < p)


def as_stream(rng: RngStream | int | None) -> RngStream:
    if rng is None:
        return RngStream(0)
    if isinstance(rng, RngStream):
        return rng
    return RngStream(int(rng))
