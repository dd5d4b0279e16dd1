"""Seed-stream splitting.

Every random draw in a run comes from a generator keyed by
``(master_seed, purpose, agent, iteration)``. The key is fed to
:class:`numpy.random.SeedSequence` as its ``spawn_key``, so streams with
different keys are statistically independent and any single stream can be
regenerated without replaying the others.
"""

from __future__ import annotations

import enum

import numpy as np

SEED_MAX = 2**64 - 1


class Purpose(enum.IntEnum):
    """Tags separating the consumers of randomness."""

    CHANNEL = 1
    DATA = 2
    DATA_SHIFT = 3
    TEST_DATA = 4
    MONTE_CARLO = 5


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def stream(master_seed: int, purpose: Purpose, agent: int = 0, iteration: int = 0) -> np.random.Generator:
    """Return the generator for one ``(purpose, agent, iteration)`` cell."""
    ss = np.random.SeedSequence(
        entropy=check_seed(master_seed),
        spawn_key=(int(purpose), int(agent), int(iteration)),
    )
    return np.random.Generator(np.random.PCG64(ss))
