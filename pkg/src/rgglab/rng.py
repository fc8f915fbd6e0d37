"""Reproducible random streams and index-ordered parallel fan-out.

Every random quantity in the package is drawn from a generator derived from a
``(seed, stream_index, path)`` triple through :class:`numpy.random.SeedSequence`.
Work that is split across processes is always split into fixed chunks, each
with its own substream, so the results never depend on the worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_index: int = 0
    path: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not (0 <= self.seed <= MASK64 and 0 <= self.stream_index <= MASK64):
            raise ValueError("seed and stream_index must be 64-bit unsigned values")

    def substream(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.stream_index, self.path + (int(index),))

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.seed, spawn_key=(self.stream_index, *self.path))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))


def as_generator(rng) -> np.random.Generator:
    """Accept an RngStream, a Generator, an int seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if rng is None or isinstance(rng, (int, np.integer)):
        return np.random.default_rng(rng)
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")


def as_stream(rng) -> RngStream:
    """Coerce to an RngStream so that independent substreams can be derived.

    A Generator is consumed once to mint a fresh 64-bit seed.
    """
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    gen = as_generator(rng)
    return RngStream(int(gen.integers(0, 2**63)))


def chunk_sizes(total: int, chunk: int) -> list[int]:
    sizes = [chunk] * (total // chunk)
    if total % chunk:
        sizes.append(total % chunk)
    return sizes


def map_indexed(fn: Callable, tasks: Sequence, workers: int = 1) -> list:
    """Apply ``fn`` to every task and return results in task order.

    ``fn`` and the tasks must be picklable when ``workers > 1``.
    """
    if workers <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))
