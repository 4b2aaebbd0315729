"""Counter-based random substreams.

Every random draw in the package comes from a Philox generator whose key is
derived from ``(master seed, phase, stage, replicate, ...)`` through
``numpy.random.SeedSequence``. A replicate's stream therefore depends only on
its coordinates, never on which worker runs it or in what order.
"""

from __future__ import annotations

import os

import numpy as np

SEED_ENV = "SEQCOMM_SEED"
DEFAULT_SEED = 20240101

# phase identifiers used as the first element of every spawn key
NULL = 1
BOOT_NET = 2
BOOT_DETECT = 3
SIM_NET = 4
SIM_DETECT = 5
CAL_ROUND = 6


def default_seed():
    raw = os.environ.get(SEED_ENV)
    return int(raw) if raw not in (None, "") else DEFAULT_SEED


def _seq(seed, keys):
    if isinstance(seed, np.random.SeedSequence):
        base = seed
        return np.random.SeedSequence(base.entropy, spawn_key=tuple(base.spawn_key) + tuple(keys))
    return np.random.SeedSequence(int(seed) % 2**64, spawn_key=tuple(int(k) for k in keys))


def substream(seed, *keys) -> np.random.Generator:
    """Independent generator for the coordinates ``keys`` under ``seed``."""
    if isinstance(seed, np.random.Generator):
        if keys:
            raise TypeError("cannot derive keyed substreams from a Generator")
        return seed
    return np.random.Generator(np.random.Philox(_seq(seed, keys)))


def subseed(seed, *keys) -> int:
    """64-bit integer seed for a nested computation at ``keys``."""
    return int(_seq(seed, keys).generate_state(1, dtype=np.uint64)[0])
