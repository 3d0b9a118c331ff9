"""Seeded random streams with hierarchical, order-free derivation.

A stream is identified by a root seed plus a path of ``(tag, index)``
pairs.  The generator key is a pure function of that identity, so a
trial's randomness never depends on which thread ran it or in what order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

_MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

T = TypeVar("T")
R = TypeVar("R")


def splitmix64(x: int) -> int:
    """One round of the SplitMix64 finalizer (full 64-bit avalanche)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _fnv1a64(text: str) -> int:
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class RngStream:
    """Identity of a reproducible random stream.

    Parameters
    ----------
    seed : int
        Root seed, reduced modulo 2**64.
    path : tuple of (str, int)
        Derivation path below the root.
    """

    seed: int
    path: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool):
            raise TypeError("seed must be an integer")
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)
        object.__setattr__(
            self, "path", tuple((str(tag), int(idx)) for tag, idx in self.path)
        )

    def child(self, tag: str, index: int = 0) -> "RngStream":
        return RngStream(self.seed, self.path + ((tag, int(index)),))

    @property
    def key(self) -> int:
        h = splitmix64(self.seed)
        for tag, idx in self.path:
            h = splitmix64(h ^ _fnv1a64(tag))
            h = splitmix64(h ^ (idx & _MASK64))
        return h

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.key))


def as_stream(rng: RngStream | int | None, default_seed: int = 0) -> RngStream:
    if rng is None:
        return RngStream(default_seed)
    if isinstance(rng, RngStream):
        return rng
    return RngStream(int(rng))


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """Map ``fn`` over ``items`` keeping input order, optionally on a thread pool."""
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(fn, items))


def spawn(rng: RngStream, tag: str, count: int) -> Sequence[RngStream]:
    return [rng.child(tag, i) for i in range(count)]
