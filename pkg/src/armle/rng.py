"""Deterministic random number generation with splittable substreams.

The generator is numpy's PCG64, keyed through ``numpy.random.SeedSequence``.
The substream for index path ``(i, j, ...)`` under root seed ``s`` is the
generator seeded by ``SeedSequence(s, spawn_key=(i, j, ...))``, so draws are a
pure function of ``(seed, path)`` and replicates can be computed in any order.

Standard normal variates are produced by inversion: uniforms are built from
53-bit integers (offset by one half, so they live strictly inside (0, 1)) and
mapped through the standard normal quantile function ``scipy.special.ndtri``.
"""
from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_U53 = 1 << 53


def substream(seed: int, *path: int) -> np.random.Generator:
    """Return the generator for the substream identified by ``path``.

    Parameters
    ----------
    seed : int
        Nonnegative root seed.
    *path : int
        Substream indices, e.g. ``substream(seed, replicate)`` or
        ``substream(seed, size_index, replicate)``.
    """
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    if any(int(k) < 0 for k in path):
        raise ValueError("substream indices must be nonnegative")
    key = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in path))
    return np.random.Generator(np.random.PCG64(key))


def standard_normals(gen: np.random.Generator, size: int) -> np.ndarray:
    """Draw i.i.d. N(0, 1) variates by inversion from 53-bit uniforms."""
    u = (gen.integers(0, _U53, size=size, dtype=np.int64) + 0.5) / _U53
    return ndtri(u)
