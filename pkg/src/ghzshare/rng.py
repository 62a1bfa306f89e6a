"""Deterministic random streams for reproducible protocol runs."""
from __future__ import annotations

import numpy as np


class RandomStream:
    """Counter-based random stream addressed by (seed, derivation path).

    Streams obtained through :meth:`child` are statistically independent and
    fully determined by the master seed plus the index path, so protocol
    rounds can execute in any order (or in parallel) and still draw identical
    values. Backed by the Philox counter-based generator.
    """

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self._seed = int(seed)
        self._path = tuple(int(i) for i in path)
        seq = np.random.SeedSequence(entropy=self._seed, spawn_key=self._path)
        self._gen = np.random.Generator(np.random.Philox(seq))

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def path(self) -> tuple[int, ...]:
        return self._path

    @property
    def generator(self) -> np.random.Generator:
        """Underlying numpy generator, for distributions not wrapped here."""
        return self._gen

    def child(self, index: int) -> "RandomStream":
        """Independent stream derived from this one by an integer index."""
        return RandomStream(self._seed, self._path + (int(index),))

    def random(self) -> float:
        return float(self._gen.random())

    def bit(self) -> int:
        return int(self._gen.integers(0, 2))

    def pick(self, probs) -> int:
        """Sample an index from a probability vector.

        Entries with zero (or negative, from floating-point round-off)
        probability can never be returned, so callers may list impossible
        outcomes without guarding against them being drawn.
        """
        u = self.random()
        acc = 0.0
        chosen = -1
        for i, p in enumerate(probs):
            if p <= 0.0:
                continue
            acc += float(p)
            chosen = i
            if u < acc:
                return i
        if chosen < 0:
            raise RuntimeError("no positive probability mass to sample from")
        return chosen  # u fell in the trailing round-off gap

    def sample_indices(self, population: int, k: int) -> tuple[int, ...]:
        """k distinct indices drawn without replacement from range(population)."""
        if k < 0 or k > population:
            raise ValueError(f"cannot draw {k} distinct indices from {population}")
        if k == 0:
            return ()
        drawn = self._gen.choice(population, size=k, replace=False)
        return tuple(sorted(int(i) for i in drawn))

    def __repr__(self) -> str:
        return f"RandomStream(seed={self._seed}, path={self._path})"
