"""Seeded random streams.

Every stochastic component takes an explicit ``numpy.random.Generator``.
Streams are derived from a master seed and an integer key path, so the
draws of one replicate never depend on how many other replicates ran
before it or on which worker ran it.
"""

import numpy as np

__all__ = ["spawn_rng", "stream_seed"]


def spawn_rng(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for ``key`` under the master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def stream_seed(rng: np.random.Generator) -> int:
    """Draw a 63-bit seed from ``rng`` for a child component that keys its own streams."""
    return int(rng.integers(0, 2**63 - 1))
