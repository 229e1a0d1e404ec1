"""Seed handling.

All randomness comes from numpy's PCG64 bit generator. A run has one integer
root seed; each pipeline stage draws from its own stream, obtained by feeding
``(root_seed, crc32(stage_name), index)`` into :class:`numpy.random.SeedSequence`
(the stage key and replica index become the spawn key). Stages can therefore be
re-run on their own and still see exactly the same numbers.
"""

from __future__ import annotations

import zlib

import numpy as np


def stage_key(stage: str) -> int:
    return zlib.crc32(stage.encode("utf-8"))


def stage_seed(seed: int, stage: str, index: int = 0) -> np.random.SeedSequence:
    """Seed sequence for ``stage`` (and replica ``index``) under root ``seed``."""
    if seed is None or int(seed) < 0:
        raise ValueError(f"root seed must be a non-negative integer, got {seed!r}")
    return np.random.SeedSequence(int(seed), spawn_key=(stage_key(stage), int(index)))


def stage_rng(seed: int, stage: str, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(stage_seed(seed, stage, index)))


def as_generator(seed) -> np.random.Generator:
    """Turn an int, SeedSequence or Generator into a PCG64 Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    if seed is None:
        raise ValueError("an explicit seed is required for reproducible runs")
    return np.random.Generator(np.random.PCG64(int(seed)))
