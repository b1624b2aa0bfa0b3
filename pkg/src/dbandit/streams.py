"""Keyed random streams.

Every random draw in a simulation comes from a generator keyed by a tuple
of non-negative integers, e.g. ``(seed, Purpose.DIRECTIONS, k)``.  Adding
draws for one purpose never shifts the numbers seen by another, so extra
instrumentation cannot perturb a trajectory.
"""

from enum import IntEnum

import numpy as np


class Purpose(IntEnum):
    INIT = 0
    DIRECTIONS = 1
    LOSS_NOISE = 2
    TARGET_COIN = 3
    VERIFY = 4


def stream(*key):
    """Return a fresh generator for the integer key ``key``."""
    key = [int(v) for v in key]
    if any(v < 0 for v in key):
        raise ValueError(f"stream keys must be non-negative, got {key}")
    return np.random.default_rng(np.random.SeedSequence(key))
