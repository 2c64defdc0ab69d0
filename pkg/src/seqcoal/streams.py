"""Deterministic random-stream derivation and shared sampling helpers.

Every replicate, chunk, and subcommand owns a generator derived from the
master seed and an integer path, so output never depends on scheduling or
on how work was partitioned across threads.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["stream", "exp_inverse"]


def stream(master_seed: int, *path: int) -> np.random.Generator:
    """Generator for the (master_seed, *path) coordinate.

    SeedSequence mixes the entropy words with a counter-based hash, so
    distinct paths give statistically independent streams and the same
    path always gives the same stream.
    """
    entropy = (int(master_seed),) + tuple(int(p) for p in path)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def exp_inverse(rng: np.random.Generator, size: int | tuple | None = None):
    """Standard exponential draws by inversion, -ln(u).

    Inversion is used instead of the generator's ziggurat so that a given
    stream reproduces the same values on any platform.  u == 0.0 (possible
    since random() covers [0, 1)) is redrawn.
    """
    if size is None:
        u = rng.random()
        while u == 0.0:
            u = rng.random()
        return -math.log(u)
    u = rng.random(size)
    bad = u == 0.0
    while bad.any():
        u[bad] = rng.random(int(bad.sum()))
        bad = u == 0.0
    return -np.log(u)
